//! Offline demo corpus: a small simulated web of `.example` sites, the
//! scripted model completions that analyze them, and the dataset files
//! that list them.
//!
//! Tool fixtures are produced by running every script once in record mode
//! against the simulated providers, then pinning fetch times so the corpus
//! is byte-stable across regenerations.

use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use scam_agent::dataset::{self, Annotation, AnnotationVerdict, DatasetEntry, Label, Language, TopList};
use scam_agent::engine::{run_session, AnalysisSession, EngineConfig, TimingMode};
use scam_agent::gateway::{ScriptLibrary, ScriptedBackend};
use scam_agent::tools::{
    canonical_url, CertEntry, CertProvider, DnsAnswer, DnsClient, DnsRecordType, FetchError, FetchErrorKind,
    FetchedPage, FixturePageFetcher, FixtureStore, Mode, PageFetcher, PageStore, ProviderError, Providers,
    RateLimiter, SearchHit, SearchProvider, SocialPost, SocialProvider, SocialResults, ToolKind, ToolRegistry,
    WhoisClient, WhoisResponse,
};
use scam_agent::verdict::ScamType;
use url::Url;

pub const MODEL_ID: &str = "demo-model";
pub const CONFIG_FILE: &str = "scam-agent.toml";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const TOPLIST_FILE: &str = "toplist.csv";
pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const FIXTURES_DIR: &str = "fixtures";
pub const SCRIPTS_DIR: &str = "scripts";

const TOPLIST_CUTOFF: u32 = 10;
const POPULAR_HOST: &str = "bigsearch.example";
const POPULAR_RANK: u32 = 7;
const FORBIDDEN_URL: &str = "https://closed-shop.example/";
const TIMEOUT_URL: &str = "https://slow-crypto-bonus.example/";
const PARKED_URL: &str = "https://parked-domain.example/";

fn fetched_at() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()
}

/// Pinned latency per tool, so virtual timing in replay is meaningful.
fn pinned_elapsed(tool: &str) -> u64 {
    match tool {
        "Access URL" => 850,
        "Get Search Result" => 1200,
        "Search Reddit" | "Search X (Twitter)" => 900,
        "Retrieve WHOIS" => 320,
        "Retrieve DNS Record" => 60,
        "Retrieve Certificate" => 700,
        _ => 100,
    }
}

#[derive(Debug, Clone)]
pub struct Step {
    pub thought: String,
    pub action: String,
    pub input: String,
}

#[derive(Debug, Clone)]
pub struct DemoSite {
    pub url: String,
    pub domain: String,
    pub label: Label,
    pub scam_type: ScamType,
    pub language: Language,
    pub html: String,
    pub whois: String,
    pub hits: Vec<SearchHit>,
    pub reddit: SocialResults,
    pub certs: Vec<CertEntry>,
    pub address: String,
    /// Raw completions placed verbatim before the tool steps.
    pub preamble: Vec<String>,
    pub steps: Vec<Step>,
    pub final_json: String,
}

impl DemoSite {
    pub fn entry(&self) -> DatasetEntry {
        DatasetEntry::new(&self.url, self.label, Some(self.scam_type), self.language).with_source("demo")
    }

    pub fn is_scam(&self) -> bool {
        self.label == Label::Scam
    }

    /// Completions the model returns for this site, in order.
    pub fn script(&self) -> Vec<String> {
        let mut out = self.preamble.clone();
        for s in &self.steps {
            out.push(format!("Thought: {}\nAction: {}\nAction Input: {}", s.thought, s.action, s.input));
        }
        out.push(format!("Thought: I now know the final answer\nFinal Answer: {}", self.final_json));
        out
    }
}

struct Theme {
    scam_type: ScamType,
    scams: [(&'static str, &'static str); 3],
    legits: [(&'static str, &'static str); 3],
    scam_claims: [&'static str; 3],
}

const THEMES: [Theme; 4] = [
    Theme {
        scam_type: ScamType::OnlineShopping,
        scams: [
            ("brandoutlet-sale", "Brand Outlet Sale"),
            ("sneaker-vault-clearance", "Sneaker Vault Clearance"),
            ("luxe-watch-depot", "Luxe Watch Depot"),
        ],
        legits: [
            ("northwind-outfitters", "Northwind Outfitters"),
            ("harbor-books", "Harbor Books"),
            ("greenleaf-garden-supply", "Greenleaf Garden Supply"),
        ],
        scam_claims: ["Fake online shopping website", "Counterfeit goods store", "Online shopping scam"],
    },
    Theme {
        scam_type: ScamType::TechnicalSupport,
        scams: [
            ("defender-alert-center", "Defender Alert Center"),
            ("pc-security-helpdesk", "PC Security Helpdesk"),
            ("system-error-0x80070", "System Error 0x80070"),
        ],
        legits: [
            ("fixit-computer-repair", "FixIt Computer Repair"),
            ("brightpath-it-services", "Brightpath IT Services"),
            ("cityline-tech-help", "Cityline Tech Help"),
        ],
        scam_claims: ["Technical support scam", "Fake security alert", "Tech support scam"],
    },
    Theme {
        scam_type: ScamType::Cryptocurrency,
        scams: [
            ("double-your-btc", "Double Your BTC"),
            ("eth-airdrop-claim", "ETH Airdrop Claim"),
            ("mega-coin-giveaway", "Mega Coin Giveaway"),
        ],
        legits: [
            ("ledgerline-wallet", "Ledgerline Wallet"),
            ("coinschool-academy", "CoinSchool Academy"),
            ("blockview-explorer", "Blockview Explorer"),
        ],
        scam_claims: ["Cryptocurrency giveaway scam", "Bitcoin doubling scam", "Crypto airdrop scam"],
    },
    Theme {
        scam_type: ScamType::Investment,
        scams: [
            ("guaranteed-returns-fund", "Guaranteed Returns Fund"),
            ("forex-profit-pro", "Forex Profit Pro"),
            ("stockfund-elite", "StockFund Elite"),
        ],
        legits: [
            ("meridian-wealth-advisors", "Meridian Wealth Advisors"),
            ("oakridge-index-funds", "Oakridge Index Funds"),
            ("finlit-investing-guide", "FinLit Investing Guide"),
        ],
        scam_claims: ["Investment scam", "Ponzi scheme", "Forex trading fraud"],
    },
];

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html><head><title>{title}</title>\
         <script>window.dataLayer=[];</script><style>body{{font-family:sans-serif}}</style></head>\n\
         <body>\n{body}\n</body></html>\n"
    )
}

fn whois_text(domain: &str, created: &str, registrar: &str, registrant: &str) -> String {
    format!(
        "Domain Name: {}\nRegistry Domain ID: D{}-EXAMPLE\nRegistrar: {registrar}\nCreation Date: {created}T08:14:02Z\n\
         Registry Expiry Date: 2025-{}T08:14:02Z\nRegistrant Organization: {registrant}\nName Server: ns1.{domain}\n\
         DNSSEC: unsigned\n",
        domain.to_uppercase(),
        domain.len() * 7919,
        &created[5..]
    )
}

fn hit(url: &str, title: &str, summary: &str) -> SearchHit {
    SearchHit { url: url.into(), title: Some(title.into()), summary: summary.into() }
}

fn post(timestamp: &str, title: &str, text: &str) -> SocialPost {
    SocialPost { timestamp: timestamp.into(), title: Some(title.into()), text: text.into() }
}

fn cert(id: u64, issuer: &str, not_before: &str, not_after: &str, domain: &str) -> CertEntry {
    CertEntry {
        id: Some(id),
        issuer: issuer.into(),
        not_before: not_before.into(),
        not_after: not_after.into(),
        sans: vec![domain.into(), format!("www.{domain}")],
    }
}

fn verdict_json(result: bool, scam_type: Option<&str>, reason: &str, python_literals: bool) -> String {
    let value = serde_json::json!({ "result": result, "scam_type": scam_type, "reason": reason });
    let text = serde_json::to_string_pretty(&value).expect("json value serializes");
    if python_literals {
        text.replace(": true", ": True").replace(": false", ": False").replace(": null", ": None")
    } else {
        text
    }
}

fn step(thought: &str, action: ToolKind, input: &str) -> Step {
    Step { thought: thought.into(), action: action.name().into(), input: input.into() }
}

fn common_steps(url: &str, domain: &str) -> Vec<Step> {
    vec![
        step("I should first look at the website itself.", ToolKind::AccessUrl, url),
        step("I need the visible text of the page to judge its content.", ToolKind::ExtractText, url),
        step("The age and ownership of the domain would help.", ToolKind::RetrieveWhois, domain),
        step(
            "I should check what other people say about this site.",
            ToolKind::GetSearchResult,
            &format!("{domain} reviews"),
        ),
    ]
}

fn scam_site(theme: &Theme, i: usize) -> DemoSite {
    let (slug, name) = theme.scams[i];
    let domain = format!("{slug}.example");
    let url = format!("https://{domain}/");
    let created = ["2024-05-20", "2024-04-02", "2024-05-11"][i];
    let registrar = "Cheap Names Ltd";
    let mut steps = common_steps(&url, &domain);
    let mut reddit = SocialResults::default();
    let mut certs = vec![cert(9_100_000 + i as u64, "R3", &format!("{created}T09:00:00"), "2024-08-20T09:00:00", &domain)];
    let (title, body, extra_reason);
    match theme.scam_type {
        ScamType::OnlineShopping => {
            title = format!("{name} | Up to 90% Off Everything");
            body = format!(
                "<header><h1>{name}</h1><nav><a href=\"/\">Home</a> <a href=\"/sale\">Sale</a></nav></header>\n\
                 <main><h2>Clearance sale, today only</h2>\n\
                 <p>Designer bags, sneakers and watches at up to 90% off the retail price.</p>\n\
                 <ul><li>Leather tote bag $19.99 (was $420.00)</li><li>Limited sneakers $24.50 (was $310.00)</li>\
                 <li>Automatic watch $39.00 (was $1,250.00)</li></ul>\n\
                 <p>Payment by bank transfer only. Orders ship within 30 days.</p></main>\n\
                 <footer><p>Contact: {slug}@freemail.example</p></footer>"
            );
            steps.push(step("Checking how the domain is hosted.", ToolKind::RetrieveDnsRecord, &domain));
            extra_reason = "prices are unrealistically discounted, payment is by bank transfer only and there is no company address";
        }
        ScamType::TechnicalSupport => {
            title = "WARNING: Your computer is infected".to_string();
            body = format!(
                "<div class=\"alert\"><h1>{name}</h1>\n\
                 <p>WARNING! Your computer is infected with 3 viruses. Your personal data is at risk.</p>\n\
                 <p>Call toll-free +1-800-555-0199 immediately. Do not close this window or restart your computer.</p>\n\
                 <p><a href=\"tel:+18005550199\">Call a certified technician now</a></p>\n\
                 <p><a href=\"/remote/quicksupport.exe\">Download the remote access tool</a></p></div>"
            );
            steps.push(step("I want to see where the page links to.", ToolKind::ExtractHyperlink, &url));
            extra_reason = "the page shows a fake virus warning with urgency and pushes a phone number and remote access download";
        }
        ScamType::Cryptocurrency => {
            title = format!("{name} | Official Giveaway Event");
            body = format!(
                "<main><h1>{name}</h1>\n\
                 <p>To celebrate our launch we are giving away 5,000 BTC. Send between 0.1 and 5 BTC to the address \
                 below and receive double the amount back instantly.</p>\n\
                 <p>Address: bc1qexampleexampleexampleexample0000</p>\n\
                 <p>Limited time event. Only 3 hours left!</p></main>"
            );
            steps.push(step("Certificate history shows how long the site has existed.", ToolKind::RetrieveCertificate, &domain));
            certs.truncate(1);
            extra_reason = "it promises to double any cryptocurrency sent to it with a countdown creating urgency, and its certificate was issued days ago";
        }
        _ => {
            title = format!("{name} | Guaranteed Daily Profits");
            body = format!(
                "<main><h1>{name}</h1>\n\
                 <p>Earn 3% daily, guaranteed. Our expert traders turn $250 into $10,000 in 60 days.</p>\n\
                 <p>Minimum deposit $250. Withdraw anytime. Refer a friend and earn a 10% bonus.</p>\n\
                 <table><tr><td>Starter</td><td>3% daily</td></tr><tr><td>Premium</td><td>5% daily</td></tr></table></main>"
            );
            steps.push(step("Investors often discuss such platforms on Reddit.", ToolKind::SearchReddit, &domain));
            reddit = SocialResults {
                posts: vec![post(
                    "2024-05-28T14:03:00Z",
                    &format!("{domain} won't let me withdraw"),
                    "Deposited $500, balance shows $1,900 but every withdrawal is 'pending' and support asks for a fee.",
                )],
                comments: vec![post(
                    "2024-05-29T09:12:00Z",
                    "Re: withdrawal",
                    "Same here. Classic Ponzi, they pay early users with new deposits.",
                )],
            };
            extra_reason = "it guarantees unrealistic daily returns and users on Reddit report that withdrawals are blocked";
        }
    }
    let hits = vec![
        hit(
            &format!("https://scamwatch-forum.example/t/{slug}"),
            &format!("Is {domain} legit?"),
            &format!("Several users report losing money to {domain}. The site appeared recently and lists no company details."),
        ),
        hit(
            &format!("https://trust-rating.example/site/{domain}"),
            &format!("{domain} trust score 2/100"),
            "Very low trust score. Domain registered recently, owner hidden.",
        ),
    ];
    let reason = format!(
        "The domain was registered recently in {} with the owner redacted for privacy, {extra_reason}, and user reviews describe it as a scam.",
        &created[..7]
    );
    let claim = theme.scam_claims[i];
    let mut preamble = Vec::new();
    if theme.scam_type == ScamType::Cryptocurrency && i == 1 {
        preamble.push(format!("Thought: I should look up who registered the domain.\nAction: Whois Lookup\nAction Input: {domain}"));
    }
    DemoSite {
        whois: whois_text(&domain, created, registrar, "REDACTED FOR PRIVACY"),
        html: page(&title, &body),
        url,
        label: Label::Scam,
        scam_type: theme.scam_type,
        language: Language::En,
        hits,
        reddit,
        certs,
        address: format!("203.0.113.{}", 10 + i),
        preamble,
        steps,
        final_json: verdict_json(true, Some(claim), &reason, i == 2),
        domain,
    }
}

fn legit_site(theme: &Theme, i: usize) -> DemoSite {
    let (slug, name) = theme.legits[i];
    let domain = format!("{slug}.example");
    let url = format!("https://{domain}/");
    let created = ["2009-03-14", "2011-10-02", "2006-07-21"][i];
    let mut steps = common_steps(&url, &domain);
    let mut reddit = SocialResults::default();
    let certs: Vec<CertEntry> = (0..3)
        .map(|k| {
            let year = 2021 + k;
            cert(
                5_000_000 + (i * 10 + k) as u64,
                "Example Trust CA",
                &format!("{year}-02-01T00:00:00"),
                &format!("{}-02-01T00:00:00", year + 1),
                &domain,
            )
        })
        .collect();
    let address = "<p>Registered office: 42 Harbour Street, Springfield. Phone +1-555-0100. Company no. 0815-22.</p>";
    let content = match theme.scam_type {
        ScamType::OnlineShopping => {
            steps.push(step("Checking how the domain is hosted.", ToolKind::RetrieveDnsRecord, &domain));
            "<p>Outdoor clothing, books and garden tools at everyday prices.</p>\n\
             <ul><li>Rain jacket $89.00</li><li>Hardcover atlas $34.95</li><li>Pruning shears $22.00</li></ul>\n\
             <p>Free returns within 30 days. We accept credit cards and PayPal.</p>"
        }
        ScamType::TechnicalSupport => {
            steps.push(step("I want to see where the page links to.", ToolKind::ExtractHyperlink, &url));
            "<p>Walk-in computer repair and on-site IT support for homes and small offices.</p>\n\
             <p>Opening hours Monday to Saturday 9:00 to 18:00. Fixed-price diagnostics $49.</p>\n\
             <p><a href=\"/about\">About us</a> <a href=\"/privacy\">Privacy policy</a> <a href=\"/contact\">Contact</a></p>"
        }
        ScamType::Cryptocurrency => {
            steps.push(step("Certificate history shows how long the site has existed.", ToolKind::RetrieveCertificate, &domain));
            "<p>Learn how blockchains work, track transactions and keep your keys safe.</p>\n\
             <p>We will never ask you to send funds or share your recovery phrase.</p>\n\
             <p>Read our security guide and open source documentation.</p>"
        }
        _ => {
            steps.push(step("Investors often discuss such firms on Reddit.", ToolKind::SearchReddit, &domain));
            reddit = SocialResults {
                posts: vec![post(
                    "2023-11-02T10:00:00Z",
                    &format!("Experience with {name}?"),
                    "Been with them for six years, low fees and no surprises. Returns track the market.",
                )],
                comments: Vec::new(),
            };
            "<p>Fee-only financial planning and low-cost index funds.</p>\n\
             <p>All investments carry risk. Past performance does not guarantee future returns.</p>\n\
             <p>Licensed and registered with the financial regulator, licence FR-448812.</p>"
        }
    };
    let body = format!(
        "<header><h1>{name}</h1><nav><a href=\"/\">Home</a> <a href=\"/about\">About</a></nav></header>\n\
         <main>{content}</main>\n<footer>{address}</footer>"
    );
    let mut preamble = Vec::new();
    if theme.scam_type == ScamType::Investment && i == 2 {
        preamble.push("Thought: The site looks like an educational resource; I will gather evidence.".to_string());
    }
    let reason = format!(
        "The domain has been registered since {}, the site lists a company address and contact information, \
         prices and claims are realistic, and user reviews are positive.",
        &created[..4]
    );
    DemoSite {
        whois: whois_text(&domain, created, "Example Registrar, Inc.", name),
        html: page(name, &body),
        hits: vec![hit(
            &format!("https://reviews.example/{slug}"),
            &format!("{name} reviews"),
            &format!("4.6 out of 5 from 1,284 reviews. Customers praise {name} for reliable service."),
        )],
        url,
        label: Label::Legitimate,
        scam_type: theme.scam_type,
        language: Language::En,
        reddit,
        certs,
        address: format!("198.51.100.{}", 10 + i),
        preamble,
        steps,
        final_json: verdict_json(false, None, &reason, i == 1),
        domain,
    }
}

fn localized_site(slug: &str, language: Language, scam: bool) -> DemoSite {
    let domain = format!("{slug}.example");
    let url = format!("https://{domain}/");
    let (title, body) = match (language, scam) {
        (Language::De, true) => (
            "Schnäppchen Markt 24 | Alles bis zu 85% reduziert",
            "<h1>Schnäppchen Markt 24</h1>\n<p>Markenjacken und Sneaker bis zu 85% reduziert. Nur heute!</p>\n\
             <p>Zahlung nur per Vorkasse. Lieferzeit 4 bis 6 Wochen.</p>",
        ),
        (Language::De, false) => (
            "Bücherstube Müller",
            "<h1>Bücherstube Müller</h1>\n<p>Ihre Buchhandlung seit 1987. Bestellungen werden innerhalb von 2 Tagen geliefert.</p>\n\
             <p>Impressum: Müller GmbH, Hauptstraße 5, Musterstadt. Telefon 0555 12345.</p>",
        ),
        (_, true) => (
            "ブランド激安 | 最大90%オフ",
            "<h1>ブランド激安ストア</h1>\n<p>人気ブランドのバッグが最大90%オフ。本日限り。</p>\n<p>お支払いは銀行振込のみです。</p>",
        ),
        (_, false) => (
            "田中商店",
            "<h1>田中商店</h1>\n<p>創業1952年の文房具店です。全国配送、返品は30日以内。</p>\n\
             <p>会社概要：株式会社田中商店 東京都 電話 03-5555-0100</p>",
        ),
    };
    let created = if scam { "2024-05-03" } else { "2005-09-30" };
    let reason = if scam {
        "The domain was registered recently, the shop offers brand goods at unrealistic discounts, \
         accepts only bank transfer in advance and lists no company information."
    } else {
        "The domain is long established, the site lists company and contact information, \
         prices are normal and it offers standard payment and return options."
    };
    DemoSite {
        html: page(title, body),
        whois: whois_text(&domain, created, "Example Registrar, Inc.", if scam { "REDACTED FOR PRIVACY" } else { slug }),
        hits: if scam {
            vec![hit(&format!("https://scamwatch-forum.example/t/{slug}"), &format!("{domain} Erfahrungen / 評判"), "Ware nie angekommen. 商品が届かない。")]
        } else {
            vec![hit(&format!("https://reviews.example/{slug}"), &format!("{domain} reviews"), "Zuverlässig. 信頼できるお店。")]
        },
        steps: common_steps(&url, &domain),
        url,
        label: if scam { Label::Scam } else { Label::Legitimate },
        scam_type: ScamType::OnlineShopping,
        language,
        reddit: SocialResults::default(),
        certs: Vec::new(),
        address: if scam { "203.0.113.50".into() } else { "198.51.100.50".into() },
        preamble: Vec::new(),
        final_json: verdict_json(scam, scam.then_some("Fake shopping site"), reason, false),
        domain,
    }
}

/// Every site of the corpus, in dataset order.
pub fn sites() -> Vec<DemoSite> {
    let mut out = Vec::new();
    for theme in &THEMES {
        for i in 0..3 {
            out.push(scam_site(theme, i));
            out.push(legit_site(theme, i));
        }
    }
    out.push(localized_site("schnaeppchen-markt24", Language::De, true));
    out.push(localized_site("buecherstube-mueller", Language::De, false));
    out.push(localized_site("brand-gekiyasu", Language::Ja, true));
    out.push(localized_site("tanaka-shoten", Language::Ja, false));
    out
}

/// Candidates that drop out during dataset construction.
fn extra_candidates() -> Vec<DatasetEntry> {
    vec![
        DatasetEntry::new(format!("https://www.{POPULAR_HOST}/"), Label::Legitimate, Some(ScamType::OnlineShopping), Language::En),
        DatasetEntry::new(FORBIDDEN_URL, Label::Scam, Some(ScamType::OnlineShopping), Language::En),
        DatasetEntry::new(TIMEOUT_URL, Label::Scam, Some(ScamType::Cryptocurrency), Language::En),
        DatasetEntry::new(PARKED_URL, Label::Legitimate, Some(ScamType::Investment), Language::En),
    ]
    .into_iter()
    .map(|e| e.with_source("demo"))
    .collect()
}

/// The simulated web the demo fixtures are recorded from.
pub struct SimulatedWeb {
    sites: Vec<DemoSite>,
}

impl SimulatedWeb {
    pub fn new(sites: Vec<DemoSite>) -> Self {
        Self { sites }
    }

    fn by_domain(&self, domain: &str) -> Option<&DemoSite> {
        self.sites.iter().find(|s| s.domain == domain)
    }

    fn mentioned(&self, query: &str) -> Option<&DemoSite> {
        self.sites.iter().find(|s| query.contains(&s.domain))
    }

    pub fn providers(self) -> Providers {
        let web = Arc::new(self);
        Providers {
            fetcher: web.clone(),
            search: web.clone(),
            x_twitter: Arc::new(NoPosts),
            reddit: web.clone(),
            whois: web.clone(),
            dns: web.clone(),
            certificates: web,
        }
    }
}

impl PageFetcher for SimulatedWeb {
    fn fetch(&self, url: &Url) -> Result<FetchedPage, FetchError> {
        let ok = |status: u16, html: String| FetchedPage {
            requested_url: url.to_string(),
            final_url: url.to_string(),
            status,
            html,
        };
        match url.as_str() {
            FORBIDDEN_URL => return Ok(ok(403, page("403 Forbidden", "<h1>Forbidden</h1>"))),
            TIMEOUT_URL => return Err(FetchError::new(FetchErrorKind::Timeout, "page did not load within 30s")),
            PARKED_URL => {
                return Ok(ok(200, page("parked-domain.example", "<p>This domain may be for sale.</p>")));
            }
            _ => {}
        }
        match self.sites.iter().find(|s| s.url == url.as_str()) {
            Some(site) => Ok(ok(200, site.html.clone())),
            None => Err(FetchError::new(FetchErrorKind::Connect, format!("could not resolve {}", url.host_str().unwrap_or("")))),
        }
    }
}

impl SearchProvider for SimulatedWeb {
    fn search(&self, query: &str) -> Result<Vec<SearchHit>, ProviderError> {
        Ok(self.mentioned(query).map(|s| s.hits.clone()).unwrap_or_default())
    }
}

impl SocialProvider for SimulatedWeb {
    fn search(&self, query: &str) -> Result<SocialResults, ProviderError> {
        Ok(self.mentioned(query).map(|s| s.reddit.clone()).unwrap_or_default())
    }
}

struct NoPosts;

impl SocialProvider for NoPosts {
    fn search(&self, _: &str) -> Result<SocialResults, ProviderError> {
        Ok(SocialResults::default())
    }
}

impl WhoisClient for SimulatedWeb {
    fn lookup(&self, domain: &str) -> Result<WhoisResponse, ProviderError> {
        let text = match self.by_domain(domain) {
            Some(s) => s.whois.clone(),
            None => format!("No match for \"{}\".\n", domain.to_uppercase()),
        };
        Ok(WhoisResponse { server: "whois.nic.example".into(), text })
    }
}

impl DnsClient for SimulatedWeb {
    fn resolver(&self) -> String {
        "192.0.2.53:53".into()
    }

    fn query(&self, domain: &str, record_type: DnsRecordType) -> Result<DnsAnswer, ProviderError> {
        let Some(site) = self.by_domain(domain) else { return Ok(DnsAnswer::NxDomain) };
        let records = |r: Vec<String>| Ok(DnsAnswer::Records(r));
        match record_type {
            DnsRecordType::A => records(vec![site.address.clone()]),
            DnsRecordType::AAAA => Ok(DnsAnswer::NoRecords),
            DnsRecordType::NS => records(vec![format!("ns1.{domain}."), format!("ns2.{domain}.")]),
            DnsRecordType::SOA => records(vec![format!("ns1.{domain}. hostmaster.{domain}. 2024060101 7200 3600 1209600 3600")]),
            DnsRecordType::TXT if site.is_scam() => Ok(DnsAnswer::NoRecords),
            DnsRecordType::TXT => records(vec!["\"v=spf1 mx -all\"".into()]),
            DnsRecordType::MX if site.is_scam() => Ok(DnsAnswer::NoRecords),
            DnsRecordType::MX => records(vec![format!("10 mail.{domain}.")]),
        }
    }
}

impl CertProvider for SimulatedWeb {
    fn certificates(&self, domain: &str) -> Result<Vec<CertEntry>, ProviderError> {
        Ok(self.by_domain(domain).map(|s| s.certs.clone()).unwrap_or_default())
    }
}

fn recording_registry(store: FixtureStore) -> ToolRegistry {
    ToolRegistry::builder(Mode::Record)
        .providers(SimulatedWeb::new(sites()).providers())
        .fixtures(store)
        .rate_limiter(RateLimiter::unlimited())
        .build()
        .expect("record-mode registry with providers and fixtures")
}

pub fn engine_config() -> EngineConfig {
    EngineConfig::new(MODEL_ID).with_timing(TimingMode::Virtual)
}

/// Runs every demo script in record mode, saving fixtures under
/// `fixtures_dir`. Returns the sessions as recorded.
pub fn record_sessions(fixtures_dir: &Path) -> Vec<AnalysisSession> {
    let registry = recording_registry(FixtureStore::new(fixtures_dir));
    let mut pages = PageStore::new();
    for url in [FORBIDDEN_URL, TIMEOUT_URL, PARKED_URL] {
        let _ = registry.dispatch(ToolKind::AccessUrl.name(), url, &mut pages);
    }
    let config = engine_config();
    sites()
        .iter()
        .map(|site| {
            let backend = ScriptedBackend::new(site.script());
            run_session(&site.url, &backend, &registry, &config).unwrap_or_else(|e| *e.session)
        })
        .collect()
}

/// Rewrites fetch times and latencies to fixed values.
fn pin_fixtures(store: &FixtureStore) -> io::Result<usize> {
    let records = store.list().map_err(io::Error::other)?;
    for mut record in records.iter().cloned() {
        record.fetched_at = fetched_at();
        record.elapsed_ms = pinned_elapsed(&record.tool);
        store.save(&record).map_err(io::Error::other)?;
    }
    Ok(records.len())
}

fn write_candidates(path: &Path, entries: &[DatasetEntry]) -> io::Result<()> {
    let mut out = String::from("url,label,scam_type,language,source\n");
    for e in entries {
        let label = match e.label {
            Label::Scam => "scam",
            Label::Legitimate => "legitimate",
        };
        let scam_type = e.scam_type.map(|t| t.as_str()).unwrap_or("");
        let language = serde_json::to_value(e.language).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        out.push_str(&format!("{},{label},{scam_type},{language},{}\n", e.url, e.source));
    }
    fs::write(path, out)
}

fn toplist_csv() -> String {
    let mut out = String::new();
    for rank in 1..=20u32 {
        let domain = if rank == POPULAR_RANK { POPULAR_HOST.to_string() } else { format!("popular-{rank}.example") };
        out.push_str(&format!("{rank},{domain}\n"));
    }
    out
}

fn annotations() -> Vec<Annotation> {
    vec![
        Annotation { url: PARKED_URL.into(), verdict: AnnotationVerdict::Exclude, scam_type: None },
        Annotation { url: "https://harbor-books.example/".into(), verdict: AnnotationVerdict::Keep, scam_type: None },
    ]
}

fn config_toml() -> String {
    format!(
        "# Demo configuration: replays recorded tool output and model completions.\n\
         model_id = \"{MODEL_ID}\"\n\
         fixtures = \"{FIXTURES_DIR}\"\n\
         scripts = \"{SCRIPTS_DIR}\"\n\
         parallelism = 4\n\
         \n\
         [pricing.{MODEL_ID}]\n\
         prompt_per_1k = \"0.03\"\n\
         completion_per_1k = \"0.06\"\n"
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSummary {
    pub sites: usize,
    pub fixtures: usize,
    pub candidates: usize,
    pub retained: usize,
}

/// Writes the whole corpus under `dir`, replacing earlier fixtures and
/// scripts.
pub fn write_corpus(dir: &Path) -> io::Result<CorpusSummary> {
    let fixtures_dir = dir.join(FIXTURES_DIR);
    let scripts_dir = dir.join(SCRIPTS_DIR);
    for d in [&fixtures_dir, &scripts_dir] {
        if d.exists() {
            fs::remove_dir_all(d)?;
        }
    }
    fs::create_dir_all(dir)?;
    let all = sites();
    record_sessions(&fixtures_dir);
    let store = FixtureStore::new(&fixtures_dir);
    let fixtures = pin_fixtures(&store)?;

    let library = ScriptLibrary::new(&scripts_dir);
    for site in &all {
        let url = canonical_url(&site.url).map_err(io::Error::other)?;
        library.save(url.as_str(), &site.script()).map_err(io::Error::other)?;
    }

    let mut candidates: Vec<DatasetEntry> = all.iter().map(DemoSite::entry).collect();
    candidates.extend(extra_candidates());
    write_candidates(&dir.join(CANDIDATES_FILE), &candidates)?;
    fs::write(dir.join(TOPLIST_FILE), toplist_csv())?;
    let notes = annotations();
    let mut lines = String::new();
    for a in &notes {
        lines.push_str(&serde_json::to_string(a).map_err(io::Error::other)?);
        lines.push('\n');
    }
    fs::write(dir.join(ANNOTATIONS_FILE), lines)?;
    fs::write(dir.join(CONFIG_FILE), config_toml())?;

    let toplist = TopList::from_csv(&toplist_csv()).map_err(io::Error::other)?;
    let filtered = dataset::filter_toplist(candidates.clone(), &toplist, TOPLIST_CUTOFF);
    let checked = dataset::check_accessibility(filtered, &FixturePageFetcher::new(store), &RateLimiter::unlimited(), 1);
    let merged = dataset::merge_annotations(checked, &notes).map_err(io::Error::other)?;
    dataset::write_dataset(&dir.join(DATASET_FILE), &merged).map_err(io::Error::other)?;

    Ok(CorpusSummary {
        sites: all.len(),
        fixtures,
        candidates: candidates.len(),
        retained: merged.iter().filter(|e| !e.is_excluded()).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use scam_agent::verdict::canonicalize_scam_type;

    #[test]
    fn corpus_covers_four_types_in_both_labels() {
        let all = sites();
        assert!(all.len() >= 20);
        for t in ScamType::LABELLED {
            for label in [Label::Scam, Label::Legitimate] {
                assert!(all.iter().any(|s| s.scam_type == t && s.label == label), "{t} {label:?}");
            }
        }
    }

    #[test]
    fn claimed_types_canonicalize_to_the_label() {
        for theme in &THEMES {
            for claim in theme.scam_claims {
                assert_eq!(canonicalize_scam_type(claim).canonical, theme.scam_type, "{claim}");
            }
        }
    }

    #[test]
    fn scripts_stay_within_the_action_budget() {
        for site in sites() {
            assert!(site.script().len() <= 11, "{}", site.url);
        }
    }
}
