use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::mortality::{AgeObservation, BasisSet, MortalityObservation};

const MORTALITY_HEADER: [&str; 4] = ["year", "age", "exposure", "deaths"];
const MARKET_HEADER: [&str; 5] = ["year", "bond_yield", "equity_index", "cpi", "gdp_per_capita"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MortalityRow {
    pub year: i32,
    pub age: u32,
    pub exposure: u64,
    pub deaths: u64,
}

impl MortalityRow {
    pub fn survivors(&self) -> u64 {
        self.exposure - self.deaths
    }
}

/// Exposures and deaths by year and age.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MortalityDataset {
    rows: Vec<MortalityRow>,
    /// Non-fatal problems met while loading.
    pub warnings: Vec<String>,
}

impl MortalityDataset {
    pub fn new(rows: Vec<MortalityRow>) -> Result<Self> {
        for r in &rows {
            BasisSet::check_age(r.age)?;
            if r.deaths > r.exposure {
                return Err(Error::Parameter(format!(
                    "year {} age {}: {} deaths exceed exposure {}",
                    r.year, r.age, r.deaths, r.exposure
                )));
            }
        }
        let data = MortalityDataset {
            rows,
            warnings: Vec::new(),
        };
        check_contiguous(&data.years()).map_err(Error::Parameter)?;
        Ok(data)
    }

    pub fn rows(&self) -> &[MortalityRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct years, ascending.
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.rows.iter().map(|r| r.year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }

    /// Survivor data of one year, ordered by age.
    pub fn observation(&self, year: i32) -> Result<MortalityObservation> {
        let mut by_age: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.year == year) {
            let e = by_age.entry(r.age).or_default();
            e.0 += r.exposure;
            e.1 += r.survivors();
        }
        MortalityObservation::new(
            by_age
                .into_iter()
                .map(|(age, (exposure, survivors))| AgeObservation {
                    age,
                    exposure,
                    survivors,
                })
                .collect(),
        )
    }
}

fn check_contiguous(years: &[i32]) -> std::result::Result<(), String> {
    match years.windows(2).find(|w| w[1] != w[0] + 1) {
        Some(w) => Err(format!("years are not contiguous: {} is followed by {}", w[0], w[1])),
        None => Ok(()),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str], label: &str) -> Result<()> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    if header != expected {
        return Err(Error::Data {
            path: label.into(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), header.join(",")),
        });
    }
    Ok(())
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    label: &'a str,
    line: u64,
}

impl Row<'_> {
    fn err(&self, message: String) -> Error {
        Error::Data {
            path: self.label.into(),
            line: self.line,
            message,
        }
    }

    fn field(&self, k: usize, name: &str) -> Result<&str> {
        self.rec
            .get(k)
            .map(str::trim)
            .ok_or_else(|| self.err(format!("missing column `{name}`")))
    }

    fn number(&self, k: usize, name: &str) -> Result<f64> {
        let s = self.field(k, name)?;
        let x: f64 = s.parse().map_err(|_| self.err(format!("`{name}` is not a number: `{s}`")))?;
        if !x.is_finite() {
            return Err(self.err(format!("`{name}` is not finite")));
        }
        Ok(x)
    }

    fn year(&self) -> Result<i32> {
        let s = self.field(0, "year")?;
        s.parse().map_err(|_| self.err(format!("`year` is not an integer: `{s}`")))
    }
}

/// Read `year,age,exposure,deaths` rows. Non-integer exposures (as in
/// person-year tables) are rounded with a warning.
pub fn read_mortality_csv<R: Read>(reader: R, label: &str) -> Result<MortalityDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &MORTALITY_HEADER, label)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut rounded = 0usize;
    let mut first_rounded = None;
    for rec in rdr.records() {
        let rec = rec?;
        let row = Row {
            rec: &rec,
            label,
            line: rec.position().map_or(0, |p| p.line()),
        };
        let year = row.year()?;
        let age_s = row.field(1, "age")?;
        let age: u32 = age_s
            .parse()
            .map_err(|_| row.err(format!("`age` is not a whole number: `{age_s}`")))?;
        BasisSet::check_age(age).map_err(|e| row.err(e.to_string()))?;
        let exposure = row.number(2, "exposure")?;
        let deaths = row.number(3, "deaths")?;
        if exposure < 0.0 || deaths < 0.0 {
            return Err(row.err("exposure and deaths must be nonnegative".into()));
        }
        let exposure_int = exposure.round();
        if exposure_int != exposure {
            rounded += 1;
            first_rounded.get_or_insert(row.line);
        }
        let deaths_int = deaths.round();
        if deaths_int != deaths {
            return Err(row.err(format!("`deaths` must be a whole number, got {deaths}")));
        }
        if deaths_int > exposure_int {
            return Err(row.err(format!("{deaths_int} deaths exceed exposure {exposure_int}")));
        }
        rows.push(MortalityRow {
            year,
            age,
            exposure: exposure_int as u64,
            deaths: deaths_int as u64,
        });
    }
    if rounded > 0 {
        warnings.push(format!(
            "{label}: rounded {rounded} non-integer exposures to the nearest integer (first at line {})",
            first_rounded.unwrap_or(0)
        ));
    }
    if rows.is_empty() {
        warnings.push(format!("{label}: no data rows"));
    }
    let mut data = MortalityDataset::new(rows).map_err(|e| Error::Data {
        path: label.into(),
        line: 0,
        message: e.to_string(),
    })?;
    for w in &warnings {
        warn!("{w}");
    }
    data.warnings = warnings;
    Ok(data)
}

pub fn load_mortality_csv(path: impl AsRef<Path>) -> Result<MortalityDataset> {
    let path = path.as_ref();
    read_mortality_csv(open(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketRow {
    pub year: i32,
    /// Percent.
    pub bond_yield: f64,
    pub equity_index: f64,
    pub cpi: f64,
    pub gdp_per_capita: f64,
}

/// Annual market and macro series, one row per year.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarketDataset {
    rows: Vec<MarketRow>,
}

impl MarketDataset {
    pub fn new(mut rows: Vec<MarketRow>) -> Result<Self> {
        rows.sort_by_key(|r| r.year);
        for r in &rows {
            if [r.bond_yield, r.equity_index, r.cpi, r.gdp_per_capita]
                .iter()
                .any(|x| !(x.is_finite() && *x > 0.0))
            {
                return Err(Error::Parameter(format!("year {}: market levels must be positive", r.year)));
            }
        }
        if let Some(w) = rows.windows(2).find(|w| w[0].year == w[1].year) {
            return Err(Error::Parameter(format!("year {} appears twice", w[0].year)));
        }
        let years: Vec<i32> = rows.iter().map(|r| r.year).collect();
        check_contiguous(&years).map_err(Error::Parameter)?;
        Ok(MarketDataset { rows })
    }

    pub fn rows(&self) -> &[MarketRow] {
        &self.rows
    }

    pub fn get(&self, year: i32) -> Option<&MarketRow> {
        let first = self.rows.first()?.year;
        self.rows.get(usize::try_from(year - first).ok()?)
    }
}

/// Read `year,bond_yield,equity_index,cpi,gdp_per_capita` rows.
pub fn read_market_csv<R: Read>(reader: R, label: &str) -> Result<MarketDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    check_header(&mut rdr, &MARKET_HEADER, label)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = Row {
            rec: &rec,
            label,
            line: rec.position().map_or(0, |p| p.line()),
        };
        let r = MarketRow {
            year: row.year()?,
            bond_yield: row.number(1, "bond_yield")?,
            equity_index: row.number(2, "equity_index")?,
            cpi: row.number(3, "cpi")?,
            gdp_per_capita: row.number(4, "gdp_per_capita")?,
        };
        if [r.bond_yield, r.equity_index, r.cpi, r.gdp_per_capita].iter().any(|x| *x <= 0.0) {
            return Err(row.err("market levels must be positive".into()));
        }
        rows.push(r);
    }
    MarketDataset::new(rows).map_err(|e| Error::Data {
        path: label.into(),
        line: 0,
        message: e.to_string(),
    })
}

pub fn load_market_csv(path: impl AsRef<Path>) -> Result<MarketDataset> {
    let path = path.as_ref();
    read_market_csv(open(path)?, &path.display().to_string())
}
