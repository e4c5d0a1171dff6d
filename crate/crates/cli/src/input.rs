//! CSV ingestion: one row per group, `group,m0,m1,m2,n0,n1`.

use std::collections::HashSet;
use std::path::Path;

use serde::Deserialize;

use corrtest::{GroupCounts, StudyData};

#[derive(Debug, Deserialize)]
struct Row {
    group: String,
    m0: i64,
    m1: i64,
    m2: i64,
    n0: i64,
    n1: i64,
}

/// A parsed data file: opaque group labels plus validated study counts.
#[derive(Debug, Clone)]
pub struct DataFile {
    pub labels: Vec<String>,
    pub study: StudyData,
}

/// Parse failure with a line number when one is known.
#[derive(Debug)]
pub struct ParseError {
    pub line: Option<u64>,
    pub message: String,
}

impl std::fmt::Display for ParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

pub fn read_data_file(path: &Path) -> Result<DataFile, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ParseError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;

    let header = reader.headers().map_err(|e| ParseError {
        line: Some(1),
        message: e.to_string(),
    })?;
    let expected = ["group", "m0", "m1", "m2", "n0", "n1"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(ParseError {
            line: Some(1),
            message: format!(
                "header must be `{}`, found `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut labels = Vec::new();
    let mut groups = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.deserialize::<Row>() {
        let row = record.map_err(|e| ParseError {
            line: e.position().map(|p| p.line()),
            message: e.to_string(),
        })?;
        let line = 2 + labels.len() as u64;
        if !seen.insert(row.group.clone()) {
            return Err(ParseError {
                line: Some(line),
                message: format!("duplicate group label `{}`", row.group),
            });
        }
        let counts = GroupCounts::from_raw(labels.len(), [row.m0, row.m1, row.m2, row.n0, row.n1])
            .map_err(|e| ParseError {
                line: Some(line),
                message: e.to_string(),
            })?;
        labels.push(row.group);
        groups.push(counts);
    }

    let study = StudyData::new(groups).map_err(|e| ParseError {
        line: None,
        message: e.to_string(),
    })?;
    Ok(DataFile { labels, study })
}
