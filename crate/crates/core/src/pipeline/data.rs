//! Browsing-log and tendency TSV inputs.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::aggregation::BrowsingMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgeBand {
    /// Under 18.
    Teenage,
    /// 18 to 34.
    Young,
    /// 35 to 49.
    Midage,
    /// 50 and over.
    Elder,
}

impl Gender {
    pub const ALL: [Gender; 2] = [Gender::Male, Gender::Female];

    pub fn token(self) -> &'static str {
        match self {
            Gender::Male => "m",
            Gender::Female => "f",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    fn parse(s: &str) -> Option<Gender> {
        match s {
            "m" => Some(Gender::Male),
            "f" => Some(Gender::Female),
            _ => None,
        }
    }
}

impl AgeBand {
    pub const ALL: [AgeBand; 4] = [AgeBand::Teenage, AgeBand::Young, AgeBand::Midage, AgeBand::Elder];

    pub fn token(self) -> &'static str {
        match self {
            AgeBand::Teenage => "teen",
            AgeBand::Young => "young",
            AgeBand::Midage => "mid",
            AgeBand::Elder => "elder",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgeBand::Teenage => "teenage",
            AgeBand::Young => "young",
            AgeBand::Midage => "midage",
            AgeBand::Elder => "elder",
        }
    }

    fn parse(s: &str) -> Option<AgeBand> {
        AgeBand::ALL.into_iter().find(|a| a.token() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserLabels {
    pub gender: Gender,
    pub age: AgeBand,
}

/// The demographic attribute a classifier predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Gender,
    Age,
}

impl Attribute {
    pub fn class_names(self) -> Vec<String> {
        match self {
            Attribute::Gender => Gender::ALL.iter().map(|g| g.name().to_string()).collect(),
            Attribute::Age => AgeBand::ALL.iter().map(|a| a.name().to_string()).collect(),
        }
    }

    pub fn label_index(self, labels: &UserLabels) -> usize {
        match self {
            Attribute::Gender => labels.gender as usize,
            Attribute::Age => labels.age as usize,
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Attribute::Gender => "gender",
            Attribute::Age => "age",
        })
    }
}

impl FromStr for Attribute {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gender" => Ok(Attribute::Gender),
            "age" => Ok(Attribute::Age),
            _ => Err(PipelineError::Usage(format!(
                "unknown attribute {s:?} (expected gender or age)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BrowsingLog {
    pub matrix: BrowsingMatrix,
    pub labels: BTreeMap<String, UserLabels>,
}

pub const BROWSING_HEADER: [&str; 5] = ["user_id", "site_id", "frequency", "gender", "age_band"];

fn parse_err(line: usize, message: impl Into<String>) -> PipelineError {
    PipelineError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `user_id \t site_id \t frequency \t gender \t age_band` rows after
/// a mandatory header. Repeated (user, site) rows sum their frequencies.
pub fn parse_browsing_log<R: BufRead>(reader: R) -> Result<BrowsingLog, PipelineError> {
    let mut log = BrowsingLog::default();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, header)) => {
            let header = header?;
            let fields: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
            if fields != BROWSING_HEADER {
                return Err(parse_err(1, format!("expected header {:?}", BROWSING_HEADER.join("\t"))));
            }
        }
        None => return Err(parse_err(1, "missing header row")),
    }
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(lineno, format!("expected 5 fields, found {}", fields.len())));
        }
        let (user, site) = (fields[0], fields[1]);
        if user.is_empty() || site.is_empty() {
            return Err(parse_err(lineno, "empty user or site id"));
        }
        let freq: u64 = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("frequency {:?} is not a positive integer", fields[2])))?;
        if freq == 0 {
            return Err(parse_err(lineno, "frequency must be positive"));
        }
        let gender = Gender::parse(fields[3])
            .ok_or_else(|| parse_err(lineno, format!("unknown gender {:?}", fields[3])))?;
        let age = AgeBand::parse(fields[4])
            .ok_or_else(|| parse_err(lineno, format!("unknown age band {:?}", fields[4])))?;
        let labels = UserLabels { gender, age };
        match log.labels.get(user) {
            Some(prev) if *prev != labels => {
                return Err(parse_err(lineno, format!("conflicting labels for user {user:?}")));
            }
            Some(_) => {}
            None => {
                log.labels.insert(user.to_string(), labels);
            }
        }
        log.matrix.add(user, site, freq);
    }
    Ok(log)
}

pub fn load_browsing_log(path: impl AsRef<Path>) -> Result<BrowsingLog, PipelineError> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_browsing_log(BufReader::new(file))
}

/// Parses `site_id \t male_tendency` rows; a leading header row is optional.
pub fn parse_tendency<R: BufRead>(reader: R) -> Result<Vec<(String, f64)>, PipelineError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(lineno, format!("expected 2 fields, found {}", fields.len())));
        }
        if lineno == 1 && fields[1] == "male_tendency" {
            continue;
        }
        let score: f64 = fields[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad tendency {:?}", fields[1])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(parse_err(lineno, format!("tendency {score} outside [0, 1]")));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(parse_err(lineno, format!("duplicate site {:?}", fields[0])));
        }
        out.push((fields[0].to_string(), score));
    }
    Ok(out)
}

pub fn load_tendency(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>, PipelineError> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_tendency(BufReader::new(file))
}
