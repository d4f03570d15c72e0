use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FIELDS: [&str; 4] = ["id", "title", "description", "category"];

/// One ticket as read from disk, before any cleaning.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawTicket {
    pub id: String,
    pub title: String,
    pub description: String,
    pub category: String,
}

/// A row that could not become a ticket.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line (JSONL) or record number (delimited, header is 1).
    pub line: u64,
    pub reason: String,
    pub fields: HashMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ingested {
    pub tickets: Vec<RawTicket>,
    pub rejects: Vec<Reject>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputFormat {
    Delimited(u8),
    JsonLines,
}

impl InputFormat {
    /// From the file extension, else from the first non-empty line.
    pub fn detect(path: &Path, first_line: &str) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => return Ok(Self::JsonLines),
            Some("tsv") => return Ok(Self::Delimited(b'\t')),
            _ => {}
        }
        let line = first_line.trim_start_matches('\u{feff}').trim();
        if line.starts_with('{') {
            Ok(Self::JsonLines)
        } else if line.contains('\t') {
            Ok(Self::Delimited(b'\t'))
        } else if line.contains(',') {
            Ok(Self::Delimited(b','))
        } else {
            Err(Error::Data(format!(
                "{}: unknown input format (expected a comma or tab separated header, or JSON lines)",
                path.display()
            )))
        }
    }
}

pub fn ingest_path(path: &Path) -> Result<Ingested> {
    let bytes = std::fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let first = bytes
        .split(|b| *b == b'\n')
        .map(|l| String::from_utf8_lossy(l).into_owned())
        .find(|l| !l.trim().is_empty())
        .unwrap_or_default();
    let format = InputFormat::detect(path, &first)?;
    ingest_reader(bytes.as_slice(), format).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn ingest_reader<R: Read>(reader: R, format: InputFormat) -> Result<Ingested> {
    match format {
        InputFormat::Delimited(delim) => ingest_delimited(reader, delim),
        InputFormat::JsonLines => ingest_jsonl(reader),
    }
}

fn build(fields: HashMap<String, String>, present: &[bool; 4], line: u64, out: &mut Ingested) {
    let missing = FIELDS
        .iter()
        .zip(present)
        .find(|(name, ok)| !**ok || (**name == "id" && fields.get("id").is_none_or(|v| v.trim().is_empty())))
        .map(|(name, _)| *name);
    if let Some(name) = missing {
        out.rejects.push(Reject {
            line,
            reason: format!("missing field: {name}"),
            fields,
        });
        return;
    }
    let get = |k: &str| fields.get(k).cloned().unwrap_or_default();
    out.tickets.push(RawTicket {
        id: get("id"),
        title: get("title"),
        description: get("description"),
        category: get("category"),
    });
}

fn ingest_delimited<R: Read>(reader: R, delim: u8) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delim)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_lowercase())
        .collect();
    let mut columns = [usize::MAX; 4];
    for (slot, name) in columns.iter_mut().zip(FIELDS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("line 1: header lacks column {name:?}")))?;
    }
    let mut out = Ingested::default();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let pos = e.position().map_or(String::new(), |p| format!("line {}: ", p.line()));
            Error::Data(format!("{pos}{e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut fields = HashMap::new();
        let mut present = [false; 4];
        for (i, (&col, name)) in columns.iter().zip(FIELDS).enumerate() {
            if let Some(v) = record.get(col) {
                fields.insert(name.to_string(), v.to_string());
                present[i] = true;
            }
        }
        build(fields, &present, line, &mut out);
    }
    Ok(out)
}

fn ingest_jsonl<R: Read>(reader: R) -> Result<Ingested> {
    let mut out = Ingested::default();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                out.rejects.push(Reject {
                    line: line_no,
                    reason: format!("malformed record: {e}"),
                    fields: HashMap::new(),
                });
                continue;
            }
        };
        let Some(obj) = value.as_object() else {
            out.rejects.push(Reject {
                line: line_no,
                reason: "malformed record: not an object".into(),
                fields: HashMap::new(),
            });
            continue;
        };
        let mut fields = HashMap::new();
        let mut present = [false; 4];
        for (i, name) in FIELDS.iter().enumerate() {
            let v = match obj.get(*name) {
                Some(serde_json::Value::String(s)) => Some(s.clone()),
                Some(serde_json::Value::Number(n)) => Some(n.to_string()),
                _ => None,
            };
            if let Some(v) = v {
                fields.insert(name.to_string(), v);
                present[i] = true;
            }
        }
        build(fields, &present, line_no, &mut out);
    }
    Ok(out)
}

pub fn write_tickets_csv<W: Write>(w: W, tickets: &[RawTicket]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FIELDS)?;
    for t in tickets {
        wtr.write_record([&t.id, &t.title, &t.description, &t.category])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Rejects in the input schema plus `line` and `reason` columns.
pub fn write_rejects_csv<W: Write>(w: W, rejects: &[Reject]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FIELDS.iter().copied().chain(["line", "reason"]))?;
    for r in rejects {
        let mut row: Vec<String> = FIELDS.iter().map(|f| r.fields.get(*f).cloned().unwrap_or_default()).collect();
        row.push(r.line.to_string());
        row.push(r.reason.clone());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let data = "id,title,description,category\n1,a,b,X/Y\n2,c,d,X/Z\n3,\"e, f\",g,X/Y\n";
        let got = ingest_reader(data.as_bytes(), InputFormat::Delimited(b',')).unwrap();
        assert_eq!(got.tickets.len(), 3);
        assert_eq!(got.tickets[2].title, "e, f");
        assert!(got.rejects.is_empty());
    }

    #[test]
    fn missing_category_rejected() {
        let data = "id\ttitle\tdescription\tcategory\n1\ta\tb\n2\tc\td\tX/Y\n";
        let got = ingest_reader(data.as_bytes(), InputFormat::Delimited(b'\t')).unwrap();
        assert_eq!(got.tickets.len(), 1);
        assert_eq!(got.rejects.len(), 1);
        assert_eq!(got.rejects[0].reason, "missing field: category");
        assert_eq!(got.rejects[0].line, 2);
    }

    #[test]
    fn duplicate_ids_both_ingested() {
        let data = "{\"id\":\"7\",\"title\":\"a\",\"description\":\"b\",\"category\":\"X/Y\"}\n\
                    {\"id\":7,\"title\":\"c\",\"description\":\"d\",\"category\":\"X/Y\"}\n\
                    {\"id\":\"8\",\"title\":\"c\"}\n\
                    not json\n";
        let got = ingest_reader(data.as_bytes(), InputFormat::JsonLines).unwrap();
        assert_eq!(got.tickets.len(), 2);
        assert_eq!(got.tickets[1].id, "7");
        assert_eq!(got.rejects.len(), 2);
        assert_eq!(got.rejects[0].reason, "missing field: description");
        assert!(got.rejects[1].reason.starts_with("malformed record"));
    }

    #[test]
    fn format_detection() {
        let p = Path::new("x.txt");
        assert_eq!(InputFormat::detect(p, "id,title").unwrap(), InputFormat::Delimited(b','));
        assert_eq!(InputFormat::detect(p, "id\ttitle").unwrap(), InputFormat::Delimited(b'\t'));
        assert_eq!(InputFormat::detect(p, "{\"id\":1}").unwrap(), InputFormat::JsonLines);
        assert!(InputFormat::detect(p, "garbage").is_err());
        assert!(ingest_reader("id,title\n1,2\n".as_bytes(), InputFormat::Delimited(b',')).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = vec![RawTicket {
            id: "1".into(),
            title: "quote \" and, comma".into(),
            description: "multi\nline".into(),
            category: "A/B".into(),
        }];
        let mut buf = Vec::new();
        write_tickets_csv(&mut buf, &t).unwrap();
        let back = ingest_reader(buf.as_slice(), InputFormat::Delimited(b',')).unwrap();
        assert_eq!(back.tickets, t);
    }
}
