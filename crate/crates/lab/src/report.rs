//! Inequality-chain reports and their CSV/JSON forms.

use serde::Serialize;

/// Relative tolerance for `≤` lines.
pub const LE_TOL: f64 = 1e-10;
/// Relative tolerance for `=` lines.
pub const EQ_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

/// One displayed line `lhs ≤ rhs` (or `=`), with `slack = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainRow {
    pub line_id: String,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
}

impl ChainRow {
    pub fn le(line_id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let satisfied = lhs.is_finite() && rhs.is_finite() && lhs <= rhs + LE_TOL * scale;
        Self::build(line_id.into(), Relation::Le, lhs, rhs, satisfied)
    }

    pub fn eq(line_id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let satisfied = lhs.is_finite() && rhs.is_finite() && (lhs - rhs).abs() <= EQ_TOL * scale;
        Self::build(line_id.into(), Relation::Eq, lhs, rhs, satisfied)
    }

    fn build(line_id: String, relation: Relation, lhs: f64, rhs: f64, satisfied: bool) -> Self {
        Self {
            line_id,
            relation,
            lhs,
            rhs,
            satisfied,
            slack: rhs - lhs,
        }
    }
}

/// A measured quantity logged alongside a chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Constant {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ChainReport {
    pub chain: String,
    pub rows: Vec<ChainRow>,
    pub constants: Vec<Constant>,
    pub notes: Vec<String>,
}

impl ChainReport {
    pub fn new(chain: impl Into<String>) -> Self {
        Self {
            chain: chain.into(),
            ..Self::default()
        }
    }

    /// True iff every row is satisfied.
    pub fn passes(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ChainRow> {
        self.rows.iter().filter(|r| !r.satisfied)
    }

    pub fn push(&mut self, row: ChainRow) {
        self.rows.push(row);
    }

    pub fn constant(&mut self, name: impl Into<String>, value: f64) {
        self.constants.push(Constant {
            name: name.into(),
            value,
        });
    }

    pub fn constant_value(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|c| c.name == name).map(|c| c.value)
    }

    /// Append another report's rows and constants under `prefix/`.
    pub fn absorb(&mut self, prefix: &str, other: ChainReport) {
        for mut r in other.rows {
            r.line_id = format!("{prefix}/{}", r.line_id);
            self.rows.push(r);
        }
        for mut c in other.constants {
            c.name = format!("{prefix}/{}", c.name);
            self.constants.push(c);
        }
        self.notes.extend(other.notes.into_iter().map(|n| format!("{prefix}: {n}")));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Rows as RFC 4180 CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv_writer();
        for r in &self.rows {
            w.serialize(r).expect("rows serialize");
        }
        finish(w)
    }
}

pub(crate) fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new())
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("CSV output is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_and_slack() {
        assert!(ChainRow::le("a", 1.0, 1.0).satisfied);
        assert!(ChainRow::le("a", 1.0 + 1e-14, 1.0).satisfied);
        assert!(!ChainRow::le("a", 1.001, 1.0).satisfied);
        assert!(ChainRow::le("zero", 0.0, 0.0).satisfied);
        assert!(!ChainRow::le("nan", f64::NAN, 1.0).satisfied);
        assert!(!ChainRow::eq("e", 1.0, 1.1).satisfied);
        assert!(ChainRow::eq("e", 2.0, 2.0 * (1.0 + 1e-12)).satisfied);
        assert_eq!(ChainRow::le("s", 1.0, 3.0).slack, 2.0);
    }

    #[test]
    fn passes_iff_all_rows_hold() {
        let mut r = ChainReport::new("demo");
        assert!(r.passes());
        r.push(ChainRow::le("one", 1.0, 2.0));
        assert!(r.passes());
        r.push(ChainRow::le("two", 3.0, 2.0));
        assert!(!r.passes());
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn csv_quotes_and_crlf() {
        let mut r = ChainReport::new("demo");
        r.push(ChainRow::le("a, \"b\"", 0.5, 1.0));
        let csv = r.to_csv();
        assert_eq!(csv, "line_id,relation,lhs,rhs,satisfied,slack\r\n\"a, \"\"b\"\"\",<=,0.5,1.0,true,0.5\r\n");
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["rows"][0]["relation"], "<=");
        assert_eq!(json["rows"][0]["satisfied"], true);
    }

    #[test]
    fn absorb_prefixes() {
        let mut inner = ChainReport::new("x");
        inner.push(ChainRow::eq("line", 1.0, 1.0));
        inner.constant("c", 2.0);
        let mut outer = ChainReport::new("y");
        outer.absorb("trial-00", inner);
        assert_eq!(outer.rows[0].line_id, "trial-00/line");
        assert_eq!(outer.constant_value("trial-00/c"), Some(2.0));
    }
}
