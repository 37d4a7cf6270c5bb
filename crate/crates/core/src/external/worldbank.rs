//! Client for the World Bank indicators API (v2, JSON).

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::time::Duration;

use serde::Deserialize;

use super::IndicatorTable;
use crate::error::{Error, Result};

pub const DEFAULT_BASE_URL: &str = "https://api.worldbank.org/v2";

/// Fetches a URL body; errors are transport failures eligible for retry.
pub trait Transport: Send + Sync {
    fn get(&self, url: &str) -> std::result::Result<String, String>;
}

/// Blocking HTTPS transport.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(timeout: Duration) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Network {
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpTransport { client })
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<String, String> {
        let resp = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status} for {url}"));
        }
        resp.text().map_err(|e| e.to_string())
    }
}

/// Serves recorded responses keyed by the `page` query parameter.
pub struct FixtureTransport {
    pages: BTreeMap<u32, String>,
}

impl FixtureTransport {
    /// `bodies[k]` answers page `k + 1`.
    pub fn from_pages(bodies: Vec<String>) -> Self {
        FixtureTransport {
            pages: bodies.into_iter().enumerate().map(|(i, b)| (i as u32 + 1, b)).collect(),
        }
    }
}

fn page_of(url: &str) -> u32 {
    url.split(['?', '&'])
        .find_map(|kv| kv.strip_prefix("page="))
        .and_then(|v| v.parse().ok())
        .unwrap_or(1)
}

impl Transport for FixtureTransport {
    fn get(&self, url: &str) -> std::result::Result<String, String> {
        self.pages
            .get(&page_of(url))
            .cloned()
            .ok_or_else(|| format!("no fixture for {url}"))
    }
}

#[derive(Debug, Deserialize)]
struct Meta {
    page: u32,
    pages: u32,
}

#[derive(Debug, Deserialize)]
struct CountryRef {
    id: String,
}

#[derive(Debug, Deserialize)]
struct Observation {
    country: CountryRef,
    #[serde(default)]
    countryiso3code: Option<String>,
    date: String,
    value: Option<f64>,
}

pub struct WorldBankClient<T: Transport> {
    transport: T,
    base_url: String,
    per_page: u32,
    max_attempts: usize,
    backoff: Duration,
}

impl<T: Transport> WorldBankClient<T> {
    pub fn new(transport: T) -> Self {
        WorldBankClient {
            transport,
            base_url: DEFAULT_BASE_URL.to_string(),
            per_page: 1000,
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    pub fn with_base_url(mut self, url: impl Into<String>) -> Self {
        self.base_url = url.into();
        self
    }

    pub fn with_per_page(mut self, per_page: u32) -> Self {
        self.per_page = per_page.max(1);
        self
    }

    /// First retry waits `backoff`, doubling afterwards.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn url(&self, indicator: &str, countries: &[String], years: &RangeInclusive<i32>, page: u32) -> String {
        format!(
            "{}/country/{}/indicator/{}?date={}:{}&format=json&per_page={}&page={}",
            self.base_url.trim_end_matches('/'),
            countries.join(";"),
            indicator,
            years.start(),
            years.end(),
            self.per_page,
            page
        )
    }

    fn get_with_retry(&self, url: &str) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * (1 << (attempt - 1)));
            }
            match self.transport.get(url) {
                Ok(body) => return Ok(body),
                Err(e) => {
                    log::warn!("World Bank request failed (attempt {}): {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(Error::Network {
            attempts: self.max_attempts,
            message: last,
        })
    }

    /// All observations of `indicator` for `countries` within `years`, across pages.
    /// Null values produce no entry; countries are keyed by the API's country id.
    pub fn fetch(&self, indicator: &str, countries: &[String], years: RangeInclusive<i32>) -> Result<IndicatorTable> {
        let mut table = IndicatorTable::new();
        let mut page = 1;
        loop {
            let url = self.url(indicator, countries, &years, page);
            let body = self.get_with_retry(&url)?;
            let (meta, obs) = parse_page(&body)?;
            for o in obs {
                let Some(v) = o.value else { continue };
                let year: i32 = o.date.parse().map_err(|_| malformed("non-integer date", &body))?;
                let country = if o.country.id.is_empty() {
                    o.countryiso3code.unwrap_or_default()
                } else {
                    o.country.id
                };
                table.insert(&country, indicator, year, v)?;
            }
            if meta.page >= meta.pages {
                break;
            }
            page = meta.page + 1;
        }
        Ok(table)
    }
}

fn malformed(message: &str, body: &str) -> Error {
    let mut end = body.len().min(200);
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    Error::MalformedResponse {
        message: message.to_string(),
        snippet: body[..end].to_string(),
    }
}

fn parse_page(body: &str) -> Result<(Meta, Vec<Observation>)> {
    let json: serde_json::Value = serde_json::from_str(body).map_err(|e| malformed(&e.to_string(), body))?;
    let arr = json
        .as_array()
        .ok_or_else(|| malformed("expected a JSON array", body))?;
    if arr.len() != 2 {
        return Err(malformed("expected [metadata, data]", body));
    }
    let meta: Meta = serde_json::from_value(arr[0].clone()).map_err(|e| malformed(&e.to_string(), body))?;
    let data = if arr[1].is_null() {
        Vec::new()
    } else {
        serde_json::from_value(arr[1].clone()).map_err(|e| malformed(&e.to_string(), body))?
    };
    Ok((meta, data))
}
