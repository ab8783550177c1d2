//! Built-in environments and the bundled stand-in tables.

use conseq::environments::{Dataset, ScoreTableSpec, SyntheticSettingSpec};
use std::fmt;
use std::str::FromStr;

pub const COMPAS_STANDIN_CSV: &str = include_str!("../data/compas_standin.csv");
pub const SCORE_TABLE_STANDIN_CSV: &str = include_str!("../data/score_table_standin.csv");
/// Group weights of the bundled score table.
pub const SCORE_TABLE_STANDIN_WEIGHTS: [f64; 2] = [0.8, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Setting1,
    Setting2,
    CompasStandin,
    ScoreTableStandin,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Setting1,
        Preset::Setting2,
        Preset::CompasStandin,
        Preset::ScoreTableStandin,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Setting1 => "setting1",
            Preset::Setting2 => "setting2",
            Preset::CompasStandin => "compas_standin",
            Preset::ScoreTableStandin => "score_table_standin",
        }
    }

    pub fn synthetic(&self) -> Option<SyntheticSettingSpec> {
        match self {
            Preset::Setting1 => Some(SyntheticSettingSpec::setting1()),
            Preset::Setting2 => Some(SyntheticSettingSpec::setting2()),
            _ => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(Preset::as_str).collect();
            match crate::config::suggest(s, &names) {
                Some(best) => format!("unknown environment `{s}`, did you mean `{best}`?"),
                None => format!("unknown environment `{s}`; expected one of {}", names.join(", ")),
            }
        })
    }
}

pub fn compas_standin() -> Dataset {
    Dataset::from_csv_reader(COMPAS_STANDIN_CSV.as_bytes()).expect("bundled dataset parses")
}

pub fn score_table_standin() -> ScoreTableSpec {
    ScoreTableSpec::from_csv_reader(SCORE_TABLE_STANDIN_CSV.as_bytes(), SCORE_TABLE_STANDIN_WEIGHTS)
        .expect("bundled score table parses")
}
