//! Expert knowledge tables and their translation into sampling parameters.
//!
//! A prior table has one row per cell type and one column per marker.
//! Entries say whether a type expresses a marker high (`+1`), low
//! (`-1`), or whether nothing is known (`0`). The labels present in a
//! column decide how eager the sampler is to cut that dimension and
//! where cuts tend to land:
//!
//! * both `-1` and `+1` present: the column separates types, so it gets
//!   the large weight `gamma0` and a symmetric `Beta(phi0, phi0)` cut;
//! * only low labels (`-1` with or without `0`): small weight `gamma1`,
//!   cuts skewed toward the lower end via `Beta(phi1, phi0)`;
//! * only high labels (`+1` with or without `0`): small weight `gamma1`,
//!   cuts skewed toward the upper end via `Beta(phi0, phi1)`;
//! * nothing but `0`: weight one and uniform cuts.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Side;

/// Expected marker response for one cell type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Low,
    Neutral,
    High,
}

impl Label {
    pub fn value(self) -> i8 {
        match self {
            Label::Low => -1,
            Label::Neutral => 0,
            Label::High => 1,
        }
    }

    pub fn from_value(v: i8) -> Result<Self> {
        match v {
            -1 => Ok(Label::Low),
            0 => Ok(Label::Neutral),
            1 => Ok(Label::High),
            other => Err(Error::Parse(format!(
                "label value {other} is not one of -1, 0, +1"
            ))),
        }
    }

    fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "-1" => Some(Label::Low),
            "0" => Some(Label::Neutral),
            "1" | "+1" => Some(Label::High),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Label::Low => "-1",
            Label::Neutral => "0",
            Label::High => "+1",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The distinct labels appearing in one column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelSet {
    low: bool,
    neutral: bool,
    high: bool,
}

impl LabelSet {
    pub fn from_labels<I: IntoIterator<Item = Label>>(labels: I) -> Self {
        let mut set = LabelSet::default();
        for l in labels {
            match l {
                Label::Low => set.low = true,
                Label::Neutral => set.neutral = true,
                Label::High => set.high = true,
            }
        }
        set
    }

    pub fn has_low(&self) -> bool {
        self.low
    }

    pub fn has_neutral(&self) -> bool {
        self.neutral
    }

    pub fn has_high(&self) -> bool {
        self.high
    }

    pub fn is_empty(&self) -> bool {
        !(self.low || self.neutral || self.high)
    }
}

/// Model hyperparameters: dimension weights, cut shapes, and the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    /// Weight of columns whose labels disagree (both `-1` and `+1`).
    pub gamma0: f64,
    /// Weight of columns that are informative on one side only.
    pub gamma1: f64,
    /// Larger Beta shape, pulling cuts toward the middle or the
    /// informative end.
    pub phi0: f64,
    /// Smaller Beta shape.
    pub phi1: f64,
    /// Budget of the tree-generating process.
    pub budget: f64,
}

impl Hyperparameters {
    pub fn new(gamma0: f64, gamma1: f64, phi0: f64, phi1: f64, budget: f64) -> Result<Self> {
        let all = [gamma0, gamma1, phi0, phi1, budget];
        if all.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidHyperparameters(
                "all hyperparameters must be finite and positive".into(),
            ));
        }
        if gamma1 >= gamma0 {
            return Err(Error::InvalidHyperparameters(format!(
                "gamma1 = {gamma1} must be smaller than gamma0 = {gamma0}"
            )));
        }
        if phi1 >= phi0 {
            return Err(Error::InvalidHyperparameters(format!(
                "phi1 = {phi1} must be smaller than phi0 = {phi0}"
            )));
        }
        Ok(Self {
            gamma0,
            gamma1,
            phi0,
            phi1,
            budget,
        })
    }
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            gamma0: 100.0,
            gamma1: 1.0,
            phi0: 5.0,
            phi1: 2.0,
            budget: 1.0,
        }
    }
}

/// Sampling weight of a dimension given the labels in its column.
pub fn dimension_weight(labels: LabelSet, hyper: &Hyperparameters) -> f64 {
    if labels.has_low() && labels.has_high() {
        hyper.gamma0
    } else if labels.has_low() || labels.has_high() {
        hyper.gamma1
    } else {
        1.0
    }
}

/// Beta shape parameters for the relative cut position of a dimension.
pub fn cut_beta_params(labels: LabelSet, hyper: &Hyperparameters) -> (f64, f64) {
    if labels.has_low() && labels.has_high() {
        (hyper.phi0, hyper.phi0)
    } else if labels.has_low() {
        (hyper.phi1, hyper.phi0)
    } else if labels.has_high() {
        (hyper.phi0, hyper.phi1)
    } else {
        (1.0, 1.0)
    }
}

/// Per-column sampling weights for a whole table.
pub fn dimension_weights(table: &PriorTable, hyper: &Hyperparameters) -> Vec<f64> {
    (0..table.n_markers())
        .map(|d| dimension_weight(table.label_set(d), hyper))
        .collect()
}

/// Prior table: cell types by markers, entries in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorTable {
    types: Vec<String>,
    markers: Vec<String>,
    entries: Vec<Label>, // row-major, types x markers
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '+' | '-'))
}

fn check_names(names: &[String], kind: &str) -> Result<()> {
    let mut seen = BTreeSet::new();
    for name in names {
        if !valid_name(name) {
            return Err(Error::InvalidTable(format!(
                "{kind} name {name:?} must be nonempty over [A-Za-z0-9_+-]"
            )));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidTable(format!("duplicate {kind} name {name:?}")));
        }
    }
    Ok(())
}

impl PriorTable {
    /// Build a table from row names, column names, and label rows.
    /// Zero rows are allowed (filtering can empty a table); zero columns
    /// are not.
    pub fn new(types: Vec<String>, markers: Vec<String>, rows: Vec<Vec<Label>>) -> Result<Self> {
        if markers.is_empty() {
            return Err(Error::InvalidTable("a table needs at least one marker".into()));
        }
        if rows.len() != types.len() {
            return Err(Error::InvalidTable(format!(
                "{} type names for {} rows",
                types.len(),
                rows.len()
            )));
        }
        check_names(&types, "type")?;
        check_names(&markers, "marker")?;
        let mut entries = Vec::with_capacity(types.len() * markers.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != markers.len() {
                return Err(Error::InvalidTable(format!(
                    "row {:?} has {} entries, expected {}",
                    types[i],
                    row.len(),
                    markers.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self {
            types,
            markers,
            entries,
        })
    }

    pub fn n_types(&self) -> usize {
        self.types.len()
    }

    pub fn n_markers(&self) -> usize {
        self.markers.len()
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    pub fn entry(&self, row: usize, dim: usize) -> Label {
        self.entries[row * self.markers.len() + dim]
    }

    pub fn row(&self, row: usize) -> &[Label] {
        let d = self.markers.len();
        &self.entries[row * d..(row + 1) * d]
    }

    pub fn marker_index(&self, name: &str) -> Option<usize> {
        self.markers.iter().position(|m| m == name)
    }

    /// Distinct labels in column `dim`. Empty for an empty table.
    pub fn label_set(&self, dim: usize) -> LabelSet {
        assert!(dim < self.n_markers(), "marker index out of range");
        LabelSet::from_labels((0..self.n_types()).map(|r| self.entry(r, dim)))
    }

    /// Rows compatible with the given side of a cut in `dim`: the left
    /// side keeps `-1` and `0` entries, the right side `+1` and `0`.
    /// All columns are retained; the result may be empty.
    pub fn filter_rows(&self, dim: usize, side: Side) -> PriorTable {
        assert!(dim < self.n_markers(), "marker index out of range");
        let keep = |l: Label| match side {
            Side::Left => l != Label::High,
            Side::Right => l != Label::Low,
        };
        let mut types = Vec::new();
        let mut entries = Vec::new();
        for r in 0..self.n_types() {
            if keep(self.entry(r, dim)) {
                types.push(self.types[r].clone());
                entries.extend_from_slice(self.row(r));
            }
        }
        PriorTable {
            types,
            markers: self.markers.clone(),
            entries,
        }
    }

    /// Parse a table from CSV text: a header row whose first field is
    /// ignored and whose remaining fields name the markers, then one row
    /// per type starting with its name.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse(format!("table header: {e}")))?
            .clone();
        if headers.len() < 2 {
            return Err(Error::Parse(
                "table header needs a leading field plus at least one marker".into(),
            ));
        }
        let markers: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let mut types = Vec::new();
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2; // header is line 1
            let record = record.map_err(|e| Error::Parse(format!("table row {line}: {e}")))?;
            if record.len() != markers.len() + 1 {
                return Err(Error::Parse(format!(
                    "table row {line} has {} fields, expected {}",
                    record.len(),
                    markers.len() + 1
                )));
            }
            let name = record.get(0).unwrap_or("").to_owned();
            let mut row = Vec::with_capacity(markers.len());
            for (d, field) in record.iter().skip(1).enumerate() {
                let label = Label::parse(field).ok_or_else(|| {
                    Error::Parse(format!(
                        "table row {line} ({name:?}), column {:?}: invalid entry {field:?}",
                        markers[d]
                    ))
                })?;
                row.push(label);
            }
            types.push(name);
            rows.push(row);
        }
        if types.is_empty() {
            return Err(Error::Parse("table has a header but no rows".into()));
        }
        PriorTable::new(types, markers, rows)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    /// Serialize to the same CSV layout `from_csv_str` accepts.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("type");
        for m in &self.markers {
            out.push(',');
            out.push_str(m);
        }
        out.push('\n');
        for r in 0..self.n_types() {
            out.push_str(&self.types[r]);
            for d in 0..self.n_markers() {
                out.push(',');
                out.push_str(self.entry(r, d).as_str());
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Three-type table used throughout: basophils plus two T-cell types
    /// over the markers CD4, CD8, CD3.
    pub(crate) fn tcell_table() -> PriorTable {
        PriorTable::from_csv_str(
            "type,CD4,CD8,CD3\n\
             Basophils,0,-1,-1\n\
             CD4_T_cells,+1,-1,+1\n\
             CD8_T_cells,-1,+1,+1\n",
        )
        .unwrap()
    }

    #[test]
    fn label_sets_of_the_tcell_table() {
        let t = tcell_table();
        let cd4 = t.label_set(0);
        assert!(cd4.has_low() && cd4.has_neutral() && cd4.has_high());
        let cd8 = t.label_set(1);
        assert!(cd8.has_low() && cd8.has_high() && !cd8.has_neutral());
        let cd3 = t.label_set(2);
        assert!(cd3.has_low() && cd3.has_high() && !cd3.has_neutral());
    }

    #[test]
    fn weights_follow_the_translation_rules() {
        let h = Hyperparameters::default();
        let both = LabelSet::from_labels([Label::Low, Label::High]);
        let with_neutral = LabelSet::from_labels([Label::Low, Label::Neutral, Label::High]);
        let low_only = LabelSet::from_labels([Label::Low]);
        let low_neutral = LabelSet::from_labels([Label::Low, Label::Neutral]);
        let high_only = LabelSet::from_labels([Label::High]);
        let high_neutral = LabelSet::from_labels([Label::Neutral, Label::High]);
        let neutral = LabelSet::from_labels([Label::Neutral]);

        assert_eq!(dimension_weight(both, &h), 100.0);
        assert_eq!(dimension_weight(with_neutral, &h), 100.0);
        assert_eq!(dimension_weight(low_only, &h), 1.0);
        assert_eq!(dimension_weight(low_neutral, &h), 1.0);
        assert_eq!(dimension_weight(high_only, &h), 1.0);
        assert_eq!(dimension_weight(high_neutral, &h), 1.0);
        assert_eq!(dimension_weight(neutral, &h), 1.0);
    }

    #[test]
    fn beta_params_follow_the_translation_rules() {
        let h = Hyperparameters::default();
        let both = LabelSet::from_labels([Label::Low, Label::High]);
        let low_neutral = LabelSet::from_labels([Label::Low, Label::Neutral]);
        let low_only = LabelSet::from_labels([Label::Low]);
        let high_neutral = LabelSet::from_labels([Label::Neutral, Label::High]);
        let high_only = LabelSet::from_labels([Label::High]);
        let neutral = LabelSet::from_labels([Label::Neutral]);

        assert_eq!(cut_beta_params(both, &h), (5.0, 5.0));
        assert_eq!(cut_beta_params(low_neutral, &h), (2.0, 5.0));
        assert_eq!(cut_beta_params(low_only, &h), (2.0, 5.0));
        assert_eq!(cut_beta_params(high_neutral, &h), (5.0, 2.0));
        assert_eq!(cut_beta_params(high_only, &h), (5.0, 2.0));
        assert_eq!(cut_beta_params(neutral, &h), (1.0, 1.0));
    }

    #[test]
    fn filtering_keeps_compatible_rows_and_all_columns() {
        let t = tcell_table();
        // Cut on CD3 (column 2): the low side keeps only basophils.
        let left = t.filter_rows(2, Side::Left);
        assert_eq!(left.types(), &["Basophils".to_string()]);
        assert_eq!(left.n_markers(), 3);
        let right = t.filter_rows(2, Side::Right);
        assert_eq!(
            right.types(),
            &["CD4_T_cells".to_string(), "CD8_T_cells".to_string()]
        );
        // Cut on CD4 (column 0): the neutral basophil row survives both sides.
        let l0 = t.filter_rows(0, Side::Left);
        assert_eq!(
            l0.types(),
            &["Basophils".to_string(), "CD8_T_cells".to_string()]
        );
        let r0 = t.filter_rows(0, Side::Right);
        assert_eq!(
            r0.types(),
            &["Basophils".to_string(), "CD4_T_cells".to_string()]
        );
    }

    #[test]
    fn filtering_can_empty_a_table() {
        // Both rows are high in the only marker: nothing survives the left.
        let t = PriorTable::new(
            vec!["A".into(), "B".into()],
            vec!["m".into()],
            vec![vec![Label::High], vec![Label::High]],
        )
        .unwrap();
        let left = t.filter_rows(0, Side::Left);
        assert_eq!(left.n_types(), 0);
        assert_eq!(left.n_markers(), 1);
        assert!(left.label_set(0).is_empty());
        let right = t.filter_rows(0, Side::Right);
        assert_eq!(right.n_types(), 2);
    }

    #[test]
    fn csv_round_trip_preserves_the_table() {
        let t = tcell_table();
        let text = t.to_csv_string();
        let back = PriorTable::from_csv_str(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn parse_errors_name_the_offending_location() {
        let bad_entry = "type,CD4\nBasophils,2\n";
        let err = PriorTable::from_csv_str(bad_entry).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("CD4"), "{err}");
        assert!(err.contains('2'), "{err}");

        let empty = "type,CD4\n";
        assert!(PriorTable::from_csv_str(empty).is_err());

        let dup = "type,CD4\nA,0\nA,1\n";
        let err = PriorTable::from_csv_str(dup).unwrap_err().to_string();
        assert!(err.contains("duplicate"), "{err}");

        let ragged = "type,CD4,CD8\nA,0\n";
        assert!(PriorTable::from_csv_str(ragged).is_err());

        let bad_name = "type,CD 4\nA,0\n";
        assert!(PriorTable::from_csv_str(bad_name).is_err());
    }

    #[test]
    fn hyperparameter_validation() {
        assert!(Hyperparameters::new(100.0, 1.0, 5.0, 2.0, 1.0).is_ok());
        assert!(Hyperparameters::new(1.0, 1.0, 5.0, 2.0, 1.0).is_err());
        assert!(Hyperparameters::new(100.0, 1.0, 2.0, 5.0, 1.0).is_err());
        assert!(Hyperparameters::new(100.0, 1.0, 5.0, 2.0, 0.0).is_err());
        assert!(Hyperparameters::new(100.0, -1.0, 5.0, 2.0, 1.0).is_err());
    }

    fn arbitrary_table() -> impl Strategy<Value = PriorTable> {
        let label = prop_oneof![
            Just(Label::Low),
            Just(Label::Neutral),
            Just(Label::High)
        ];
        (1usize..5, 1usize..5)
            .prop_flat_map(move |(rows, cols)| {
                proptest::collection::vec(
                    proptest::collection::vec(label.clone(), cols),
                    rows,
                )
            })
            .prop_map(|rows| {
                let cols = rows[0].len();
                let types = (0..rows.len()).map(|i| format!("t{i}")).collect();
                let markers = (0..cols).map(|d| format!("m{d}")).collect();
                PriorTable::new(types, markers, rows).unwrap()
            })
    }

    proptest! {
        #[test]
        fn filters_partition_rows_with_neutral_overlap(table in arbitrary_table(), dim_seed in 0usize..4) {
            let dim = dim_seed % table.n_markers();
            let left = table.filter_rows(dim, Side::Left);
            let right = table.filter_rows(dim, Side::Right);
            // Every row lands on at least one side, and rows on both
            // sides are exactly the neutral ones.
            for r in 0..table.n_types() {
                let name = &table.types()[r];
                let in_left = left.types().contains(name);
                let in_right = right.types().contains(name);
                prop_assert!(in_left || in_right);
                prop_assert_eq!(
                    in_left && in_right,
                    table.entry(r, dim) == Label::Neutral
                );
            }
        }

        #[test]
        fn csv_round_trip_holds_for_arbitrary_tables(table in arbitrary_table()) {
            let back = PriorTable::from_csv_str(&table.to_csv_string()).unwrap();
            prop_assert_eq!(table, back);
        }
    }
}
