//! WHOIS over TCP/43 and DNS over UDP/53 (TCP fallback on truncation).

use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use hickory_proto::op::{Message, MessageType, OpCode, Query, ResponseCode};
use hickory_proto::rr::{Name, RData, RecordType};

use super::providers::{DnsAnswer, DnsClient, DnsRecordType, ProviderError, WhoisClient, WhoisResponse};

/// Asks the root server (IANA by default) which server is authoritative
/// for the TLD, then queries that server once. Further referrals are not
/// followed.
pub struct WhoisTcpClient {
    root: String,
    port: u16,
    timeout: Duration,
}

impl Default for WhoisTcpClient {
    fn default() -> Self {
        Self::new("whois.iana.org", 43, Duration::from_secs(15))
    }
}

impl WhoisTcpClient {
    pub fn new(root: impl Into<String>, port: u16, timeout: Duration) -> Self {
        Self { root: root.into(), port, timeout }
    }

    fn query(&self, server: &str, domain: &str) -> Result<String, ProviderError> {
        let fail = |e: std::io::Error| ProviderError(format!("{server}: {e}"));
        let addr = (server, self.port)
            .to_socket_addrs()
            .map_err(fail)?
            .next()
            .ok_or_else(|| ProviderError(format!("{server}: no address")))?;
        let mut stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(fail)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(fail)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(fail)?;
        stream.write_all(format!("{domain}\r\n").as_bytes()).map_err(fail)?;
        let mut raw = Vec::new();
        stream.read_to_end(&mut raw).map_err(fail)?;
        Ok(String::from_utf8_lossy(&raw).into_owned())
    }
}

fn referral(text: &str) -> Option<String> {
    text.lines().find_map(|line| {
        let (key, value) = line.split_once(':')?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        ((key == "refer" || key == "whois") && !value.is_empty()).then(|| value.to_string())
    })
}

impl WhoisClient for WhoisTcpClient {
    fn lookup(&self, domain: &str) -> Result<WhoisResponse, ProviderError> {
        let root_text = self.query(&self.root, domain)?;
        match referral(&root_text) {
            Some(server) if !server.eq_ignore_ascii_case(&self.root) => {
                let text = self.query(&server, domain)?;
                Ok(WhoisResponse { server, text })
            }
            _ => Ok(WhoisResponse { server: self.root.clone(), text: root_text }),
        }
    }
}

/// Stub-resolver queries against one recursive resolver.
pub struct DnsUdpClient {
    resolver: SocketAddr,
    timeout: Duration,
}

impl Default for DnsUdpClient {
    fn default() -> Self {
        Self::new(SocketAddr::from(([8, 8, 8, 8], 53)), Duration::from_secs(5))
    }
}

impl DnsUdpClient {
    pub fn new(resolver: SocketAddr, timeout: Duration) -> Self {
        Self { resolver, timeout }
    }

    fn exchange(&self, request: &Message) -> Result<Message, ProviderError> {
        let fail = |e: std::io::Error| ProviderError(format!("{}: {e}", self.resolver));
        let bytes = request.to_vec().map_err(|e| ProviderError(e.to_string()))?;
        let bind: SocketAddr = if self.resolver.is_ipv4() { ([0, 0, 0, 0], 0).into() } else { "[::]:0".parse().unwrap() };
        let socket = UdpSocket::bind(bind).map_err(fail)?;
        socket.set_read_timeout(Some(self.timeout)).map_err(fail)?;
        socket.send_to(&bytes, self.resolver).map_err(fail)?;
        let mut buf = [0u8; 4096];
        let response = loop {
            let (n, from) = socket.recv_from(&mut buf).map_err(fail)?;
            if from != self.resolver {
                continue;
            }
            let message = Message::from_vec(&buf[..n]).map_err(|e| ProviderError(e.to_string()))?;
            if message.id() == request.id() {
                break message;
            }
        };
        if response.truncated() {
            return self.exchange_tcp(&bytes);
        }
        Ok(response)
    }

    fn exchange_tcp(&self, bytes: &[u8]) -> Result<Message, ProviderError> {
        let fail = |e: std::io::Error| ProviderError(format!("{} (tcp): {e}", self.resolver));
        let mut stream = TcpStream::connect_timeout(&self.resolver, self.timeout).map_err(fail)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(fail)?;
        let mut framed = (bytes.len() as u16).to_be_bytes().to_vec();
        framed.extend_from_slice(bytes);
        stream.write_all(&framed).map_err(fail)?;
        let mut len = [0u8; 2];
        stream.read_exact(&mut len).map_err(fail)?;
        let mut body = vec![0u8; u16::from_be_bytes(len) as usize];
        stream.read_exact(&mut body).map_err(fail)?;
        Message::from_vec(&body).map_err(|e| ProviderError(e.to_string()))
    }
}

fn wire_type(t: DnsRecordType) -> RecordType {
    match t {
        DnsRecordType::A => RecordType::A,
        DnsRecordType::AAAA => RecordType::AAAA,
        DnsRecordType::NS => RecordType::NS,
        DnsRecordType::SOA => RecordType::SOA,
        DnsRecordType::TXT => RecordType::TXT,
        DnsRecordType::MX => RecordType::MX,
    }
}

fn format_rdata(data: &RData) -> String {
    match data {
        RData::TXT(txt) => txt
            .txt_data()
            .iter()
            .map(|part| format!("\"{}\"", String::from_utf8_lossy(part)))
            .collect::<Vec<_>>()
            .join(" "),
        RData::CNAME(target) => format!("CNAME {target}"),
        other => other.to_string(),
    }
}

impl DnsClient for DnsUdpClient {
    fn resolver(&self) -> String {
        self.resolver.to_string()
    }

    fn query(&self, domain: &str, record_type: DnsRecordType) -> Result<DnsAnswer, ProviderError> {
        let name = Name::from_ascii(format!("{}.", domain.trim_end_matches('.'))).map_err(|e| ProviderError(e.to_string()))?;
        let mut request = Message::new();
        request
            .set_id(rand::random())
            .set_message_type(MessageType::Query)
            .set_op_code(OpCode::Query)
            .set_recursion_desired(true)
            .add_query(Query::query(name, wire_type(record_type)));
        let response = self.exchange(&request)?;
        Ok(match response.response_code() {
            ResponseCode::NXDomain => DnsAnswer::NxDomain,
            ResponseCode::NoError => {
                let records: Vec<String> =
                    response.answers().iter().filter_map(|r| r.data()).map(format_rdata).collect();
                if records.is_empty() {
                    DnsAnswer::NoRecords
                } else {
                    DnsAnswer::Records(records)
                }
            }
            other => DnsAnswer::Failed(other.to_string()),
        })
    }
}
