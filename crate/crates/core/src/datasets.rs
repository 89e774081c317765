//! Compiled-in example tables.

use std::fmt;
use std::str::FromStr;

use crate::table::ContingencyTable;

/// Marital status (rows: never married, married, divorced, widowed) by
/// education level (columns: middle school or lower, high school, bachelor's,
/// master's, PhD or higher) for 300 survey respondents.
pub const MARITAL: [[i64; 5]; 4] = [
    [18, 36, 21, 9, 6],
    [12, 36, 45, 36, 21],
    [6, 9, 9, 3, 3],
    [3, 9, 9, 6, 3],
];

/// Sex (rows: female, male) by eye colour (columns: black, brown, blue,
/// green, grey) for 167 individuals.
pub const EYE_COLOUR: [[i64; 5]; 2] = [[20, 30, 10, 15, 10], [25, 15, 12, 20, 10]];

pub fn marital() -> ContingencyTable {
    ContingencyTable::from_rows(&MARITAL).expect("embedded table is valid")
}

pub fn eyecolour() -> ContingencyTable {
    ContingencyTable::from_rows(&EYE_COLOUR).expect("embedded table is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddedDataset {
    Marital,
    EyeColour,
}

impl EmbeddedDataset {
    pub fn table(self) -> ContingencyTable {
        match self {
            Self::Marital => marital(),
            Self::EyeColour => eyecolour(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Marital => "marital",
            Self::EyeColour => "eyecolour",
        }
    }
}

impl fmt::Display for EmbeddedDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbeddedDataset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "marital" => Ok(Self::Marital),
            "eyecolour" | "eyecolor" | "eye-colour" => Ok(Self::EyeColour),
            other => Err(format!("unknown dataset `{other}` (expected marital or eyecolour)")),
        }
    }
}
