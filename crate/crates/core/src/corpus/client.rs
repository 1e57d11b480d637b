//! Record acquisition: a fixture directory for offline runs and a
//! rate-limited, retrying HTTP client for live runs.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::Deserialize;

use super::{CorpusError, DocumentRecord, RecordSource};

/// Source selection for [`fetch_records`].
#[derive(Debug, Clone)]
pub enum SourceConfig {
    /// Directory of record files, one JSON record per file, read in
    /// lexicographic filename order.
    Fixture { dir: PathBuf },
    /// Live HTTP endpoint. The credential is read from the named environment
    /// variable; requests are capped at `requests_per_second` and transient
    /// failures retry with bounded exponential backoff.
    Live {
        base_url: String,
        api_key_env: String,
        requests_per_second: f64,
        page_size: usize,
    },
}

const MAX_RETRIES: u32 = 4;
const BACKOFF_BASE_MS: u64 = 250;

/// Retry delay before attempt `attempt` (1-based), doubling from the base and
/// capped at 4 s.
pub fn backoff_delay(attempt: u32) -> Duration {
    let ms = BACKOFF_BASE_MS.saturating_mul(1u64 << (attempt - 1).min(4));
    Duration::from_millis(ms.min(4000))
}

/// Fetch records from the configured source. Fixture mode is deterministic;
/// live mode validates the credential up front.
pub fn fetch_records(
    config: &SourceConfig,
    query: &str,
    page_limit: usize,
) -> Result<Vec<DocumentRecord>, CorpusError> {
    match config {
        SourceConfig::Fixture { dir } => fetch_fixture(dir),
        SourceConfig::Live {
            base_url,
            api_key_env,
            requests_per_second,
            page_size,
        } => {
            let key = std::env::var(api_key_env)
                .map_err(|_| CorpusError::MissingCredential(api_key_env.clone()))?;
            fetch_live(base_url, &key, query, *requests_per_second, *page_size, page_limit)
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    title: String,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    keywords: Vec<String>,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    content_type: Option<super::ContentType>,
}

fn parse_record(data: &str, path: &str, line: usize) -> Result<DocumentRecord, CorpusError> {
    let raw: RawRecord = serde_json::from_str(data).map_err(|e| CorpusError::Parse {
        path: path.to_string(),
        line,
        message: e.to_string(),
    })?;
    let abstract_text = raw.abstract_text.ok_or_else(|| CorpusError::Parse {
        path: path.to_string(),
        line,
        message: "missing `abstract` field".to_string(),
    })?;
    Ok(DocumentRecord {
        id: raw.id,
        title: raw.title,
        abstract_text,
        keywords: raw.keywords,
        language: raw.language.unwrap_or_else(|| "unknown".to_string()),
        content_type: raw.content_type.unwrap_or(super::ContentType::Other),
        source: RecordSource::Fixture,
    })
}

fn fetch_fixture(dir: &PathBuf) -> Result<Vec<DocumentRecord>, CorpusError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|source| CorpusError::Io {
            path: dir.display().to_string(),
            source,
        })?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    let mut records = Vec::with_capacity(paths.len());
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let first = text
            .lines()
            .enumerate()
            .find(|(_, l)| !l.trim().is_empty());
        match first {
            Some((idx, line)) => {
                records.push(parse_record(line, &path.display().to_string(), idx + 1)?);
            }
            None => {
                return Err(CorpusError::Parse {
                    path: path.display().to_string(),
                    line: 1,
                    message: "empty record file".to_string(),
                })
            }
        }
    }
    Ok(records)
}

#[derive(Deserialize)]
struct LivePage {
    records: Vec<serde_json::Value>,
    #[serde(default)]
    next_cursor: Option<String>,
}

fn fetch_live(
    base_url: &str,
    api_key: &str,
    query: &str,
    requests_per_second: f64,
    page_size: usize,
    page_limit: usize,
) -> Result<Vec<DocumentRecord>, CorpusError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| CorpusError::Http {
            attempts: 0,
            message: e.to_string(),
        })?;
    let min_gap = if requests_per_second > 0.0 {
        Duration::from_secs_f64(1.0 / requests_per_second)
    } else {
        Duration::ZERO
    };
    let mut records = Vec::new();
    let mut cursor: Option<String> = None;
    let mut last_request: Option<Instant> = None;
    for page in 0..page_limit {
        if let Some(t) = last_request {
            let elapsed = t.elapsed();
            if elapsed < min_gap {
                std::thread::sleep(min_gap - elapsed);
            }
        }
        last_request = Some(Instant::now());
        let page_body = request_with_retry(&client, base_url, api_key, query, page_size, &cursor)?;
        let parsed: LivePage =
            serde_json::from_str(&page_body).map_err(|e| CorpusError::Parse {
                path: format!("{base_url} page {page}"),
                line: 0,
                message: e.to_string(),
            })?;
        for (i, value) in parsed.records.iter().enumerate() {
            let mut record = parse_record(
                &value.to_string(),
                &format!("{base_url} page {page}"),
                i + 1,
            )?;
            record.source = RecordSource::LiveApi;
            records.push(record);
        }
        match parsed.next_cursor {
            Some(c) if !c.is_empty() => cursor = Some(c),
            _ => break,
        }
    }
    Ok(records)
}

fn request_with_retry(
    client: &reqwest::blocking::Client,
    base_url: &str,
    api_key: &str,
    query: &str,
    page_size: usize,
    cursor: &Option<String>,
) -> Result<String, CorpusError> {
    let mut last_error = String::new();
    for attempt in 1..=MAX_RETRIES {
        let mut request = client
            .get(base_url)
            .query(&[("query", query), ("count", &page_size.to_string())])
            .header("X-API-Key", api_key);
        if let Some(c) = cursor {
            request = request.query(&[("cursor", c.as_str())]);
        }
        match request.send() {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    return resp.text().map_err(|e| CorpusError::Http {
                        attempts: attempt,
                        message: e.to_string(),
                    });
                }
                // retry only transient statuses
                if !(status.is_server_error() || status.as_u16() == 429) {
                    return Err(CorpusError::Http {
                        attempts: attempt,
                        message: format!("status {status}"),
                    });
                }
                last_error = format!("status {status}");
            }
            Err(e) => last_error = e.to_string(),
        }
        if attempt < MAX_RETRIES {
            std::thread::sleep(backoff_delay(attempt));
        }
    }
    Err(CorpusError::Http {
        attempts: MAX_RETRIES,
        message: last_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_mode_reads_in_filename_order() {
        let dir = tempfile::tempdir().unwrap();
        for (name, id) in [("b.json", "2"), ("a.json", "1"), ("c.json", "3")] {
            std::fs::write(
                dir.path().join(name),
                format!(r#"{{"id":"{id}","title":"t","abstract":"text body"}}"#),
            )
            .unwrap();
        }
        let config = SourceConfig::Fixture { dir: dir.path().to_path_buf() };
        let records = fetch_records(&config, "", 10).unwrap();
        let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["1", "2", "3"]);
    }

    #[test]
    fn missing_credential_is_configuration_error() {
        let config = SourceConfig::Live {
            base_url: "http://localhost:1".into(),
            api_key_env: "LITMINE_TEST_NO_SUCH_KEY".into(),
            requests_per_second: 10.0,
            page_size: 10,
        };
        let err = fetch_records(&config, "chrom*", 1).unwrap_err();
        assert!(matches!(err, CorpusError::MissingCredential(_)));
    }

    #[test]
    fn fixture_missing_abstract_is_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("bad.json"), r#"{"id":"1","title":"t"}"#).unwrap();
        let config = SourceConfig::Fixture { dir: dir.path().to_path_buf() };
        let err = fetch_records(&config, "", 10).unwrap_err();
        match err {
            CorpusError::Parse { path, line, message } => {
                assert!(path.ends_with("bad.json"));
                assert_eq!(line, 1);
                assert!(message.contains("abstract"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn backoff_doubles_and_caps() {
        assert_eq!(backoff_delay(1), Duration::from_millis(250));
        assert_eq!(backoff_delay(2), Duration::from_millis(500));
        assert_eq!(backoff_delay(3), Duration::from_millis(1000));
        assert!(backoff_delay(10) <= Duration::from_millis(4000));
    }
}
