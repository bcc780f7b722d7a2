//! Turning posterior trees into per-cell type labels.
//!
//! A leaf's candidate types are the rows of its propagated subtable.
//! Classification under one tree gives every cell in a leaf the same
//! label: the single candidate if there is one, a uniform draw among
//! candidates otherwise, and `UNKNOWN` when filtering removed every
//! row. Across posterior samples, labels are combined by plurality
//! vote, ignoring `UNKNOWN` votes; vote ties go to the label backed by
//! the highest-posterior chain.

use rand::Rng;

use crate::emissions::{assign, CellMatrix};
use crate::error::{Error, Result};
use crate::geom::{LeafView, MondrianTree};
use crate::sampler::RandomSource;

/// Reserved label for cells whose leaf has no candidate type.
pub const UNKNOWN_LABEL: &str = "UNKNOWN";

/// Per-cell labels over a shared name universe; `None` means unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    names: Vec<String>,
    labels: Vec<Option<usize>>,
}

impl LabelVector {
    pub fn new(names: Vec<String>, labels: Vec<Option<usize>>) -> Result<Self> {
        if let Some(bad) = labels.iter().flatten().find(|&&i| i >= names.len()) {
            return Err(Error::InvalidArgument(format!(
                "label index {bad} out of range for {} names",
                names.len()
            )));
        }
        Ok(Self { names, labels })
    }

    /// Build from per-cell optional names, collecting the universe in
    /// first-seen order.
    pub fn from_names(per_cell: Vec<Option<String>>) -> Self {
        let mut names: Vec<String> = Vec::new();
        let labels = per_cell
            .into_iter()
            .map(|name| {
                name.map(|n| match names.iter().position(|k| *k == n) {
                    Some(i) => i,
                    None => {
                        names.push(n);
                        names.len() - 1
                    }
                })
            })
            .collect();
        Self { names, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Name of the label of cell `i`, or `None` for unknown.
    pub fn name(&self, i: usize) -> Option<&str> {
        self.labels[i].map(|idx| self.names[idx].as_str())
    }
}

/// Candidate types of one leaf: the rows that survived filtering.
pub fn leaf_type_candidates<'a>(leaf: &LeafView<'a>) -> &'a [String] {
    leaf.table.types()
}

/// Label every cell under a single tree. Multi-candidate leaves draw
/// one label uniformly per leaf (in depth-first leaf order), shared by
/// all cells assigned to that leaf.
pub fn classify_sample(
    tree: &MondrianTree,
    data: &CellMatrix,
    rng: &mut RandomSource,
) -> Result<LabelVector> {
    let leaves = tree.leaves();

    // Universe: distinct candidate names in depth-first leaf order.
    let mut names: Vec<String> = Vec::new();
    let universe_index = |name: &str, names: &mut Vec<String>| -> usize {
        match names.iter().position(|k| k == name) {
            Some(i) => i,
            None => {
                names.push(name.to_owned());
                names.len() - 1
            }
        }
    };

    let mut leaf_labels: Vec<Option<usize>> = Vec::with_capacity(leaves.len());
    for leaf in &leaves {
        let candidates = leaf_type_candidates(leaf);
        let label = match candidates.len() {
            0 => None,
            1 => Some(universe_index(&candidates[0], &mut names)),
            k => {
                let pick = rng.gen_range(0..k);
                Some(universe_index(&candidates[pick], &mut names))
            }
        };
        leaf_labels.push(label);
    }

    let assignments = assign(tree, data)?;
    let labels = assignments.iter().map(|&leaf| leaf_labels[leaf]).collect();
    Ok(LabelVector { names, labels })
}

/// Plurality vote over posterior samples, weighted for tie-breaking by
/// each sample's log posterior. `UNKNOWN` votes are ignored unless a
/// cell receives nothing else.
pub fn vote(samples: &[LabelVector], log_posteriors: &[f64]) -> Result<LabelVector> {
    Ok(vote_with_fractions(samples, log_posteriors)?.0)
}

/// Like [`vote`], also returning the fraction of samples that voted for
/// the winning label (unknown cells report the fraction of unknown
/// votes).
pub fn vote_with_fractions(
    samples: &[LabelVector],
    log_posteriors: &[f64],
) -> Result<(LabelVector, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("vote needs at least one sample".into()));
    }
    if samples.len() != log_posteriors.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} posterior values",
            samples.len(),
            log_posteriors.len()
        )));
    }
    let cells = samples[0].len();
    if samples.iter().any(|s| s.len() != cells) {
        return Err(Error::DimensionMismatch(
            "label vectors disagree on the cell count".into(),
        ));
    }

    // Merge the name universes (samples from different topologies may
    // disagree on ordering or coverage).
    let mut names: Vec<String> = Vec::new();
    let mut remap: Vec<Vec<usize>> = Vec::with_capacity(samples.len());
    for s in samples {
        let map = s
            .names()
            .iter()
            .map(|n| match names.iter().position(|k| k == n) {
                Some(i) => i,
                None => {
                    names.push(n.clone());
                    names.len() - 1
                }
            })
            .collect();
        remap.push(map);
    }

    let total = samples.len() as f64;
    let mut labels = Vec::with_capacity(cells);
    let mut fractions = Vec::with_capacity(cells);
    let mut counts: Vec<usize> = vec![0; names.len()];
    let mut backing: Vec<(f64, usize)> = vec![(f64::NEG_INFINITY, usize::MAX); names.len()];
    for cell in 0..cells {
        counts.iter_mut().for_each(|c| *c = 0);
        backing
            .iter_mut()
            .for_each(|b| *b = (f64::NEG_INFINITY, usize::MAX));
        let mut unknown = 0usize;
        for (s, sample) in samples.iter().enumerate() {
            match sample.labels()[cell] {
                None => unknown += 1,
                Some(local) => {
                    let global = remap[s][local];
                    counts[global] += 1;
                    // Track the strongest chain voting for this label;
                    // equal strength resolves to the earlier sample.
                    if log_posteriors[s] > backing[global].0 {
                        backing[global] = (log_posteriors[s], s);
                    }
                }
            }
        }
        let top = counts.iter().max().copied().unwrap_or(0);
        if top == 0 {
            labels.push(None);
            fractions.push(unknown as f64 / total);
            continue;
        }
        let mut winner = usize::MAX;
        let mut winner_backing = (f64::NEG_INFINITY, usize::MAX);
        for (label, &count) in counts.iter().enumerate() {
            if count != top {
                continue;
            }
            let candidate = backing[label];
            let better = candidate.0 > winner_backing.0
                || (candidate.0 == winner_backing.0 && candidate.1 < winner_backing.1);
            if winner == usize::MAX || better {
                winner = label;
                winner_backing = candidate;
            }
        }
        labels.push(Some(winner));
        fractions.push(top as f64 / total);
    }
    Ok((LabelVector { names, labels }, fractions))
}

/// Fraction of cells whose predicted name matches the truth; unknown
/// predictions only count when the truth is unknown too.
pub fn accuracy(predicted: &LabelVector, truth: &LabelVector) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InvalidArgument(
            "accuracy over zero cells is undefined".into(),
        ));
    }
    let hits = (0..predicted.len())
        .filter(|&i| predicted.name(i) == truth.name(i))
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{AxisBox, TreeSpec};
    use crate::table::PriorTable;

    fn tcell_table() -> PriorTable {
        PriorTable::from_csv_str(
            "type,CD4,CD8,CD3\n\
             Basophils,0,-1,-1\n\
             CD4_T_cells,+1,-1,+1\n\
             CD8_T_cells,-1,+1,+1\n",
        )
        .unwrap()
    }

    fn one_cell(coords: Vec<f64>) -> CellMatrix {
        CellMatrix::new(
            vec!["CD4".into(), "CD8".into(), "CD3".into()],
            vec![coords],
        )
        .unwrap()
    }

    #[test]
    fn uncut_tree_exposes_every_type_as_candidate() {
        let table = tcell_table();
        let tree = MondrianTree::single_leaf(1.0, AxisBox::unit(3), table.clone()).unwrap();
        let leaves = tree.leaves();
        assert_eq!(leaf_type_candidates(&leaves[0]).len(), 3);
    }

    #[test]
    fn informative_path_pins_down_a_single_type() {
        // Cut CD3 (dim 2), then CD4 (dim 0) on the high side: cells high
        // in both should be labeled CD4 T cells.
        let table = tcell_table();
        let spec = TreeSpec::cut(
            2,
            0.5,
            0.01,
            TreeSpec::Leaf,
            TreeSpec::cut(0, 0.5, 0.01, TreeSpec::Leaf, TreeSpec::Leaf),
        );
        let tree = MondrianTree::from_spec(1.0, AxisBox::unit(3), &table, &spec).unwrap();
        let leaves = tree.leaves();
        // Leaves: CD3-low, then CD3-high split by CD4.
        assert_eq!(leaf_type_candidates(&leaves[0]), &["Basophils".to_string()]);
        assert_eq!(
            leaf_type_candidates(&leaves[2]),
            &["CD4_T_cells".to_string()]
        );
        let data = one_cell(vec![0.9, 0.1, 0.9]);
        let mut rng = RandomSource::new(1);
        let labels = classify_sample(&tree, &data, &mut rng).unwrap();
        assert_eq!(labels.name(0), Some("CD4_T_cells"));
    }

    #[test]
    fn empty_leaf_labels_cells_unknown() {
        // Two rows, both high in the only marker: the left side of any
        // cut has no candidates.
        let table = PriorTable::from_csv_str("type,m\nA,+1\nB,+1\n").unwrap();
        let spec = TreeSpec::cut(0, 0.5, 0.01, TreeSpec::Leaf, TreeSpec::Leaf);
        let tree = MondrianTree::from_spec(1.0, AxisBox::unit(1), &table, &spec).unwrap();
        let data = CellMatrix::new(vec!["m".into()], vec![vec![0.25], vec![0.75]]).unwrap();
        let mut rng = RandomSource::new(2);
        let labels = classify_sample(&tree, &data, &mut rng).unwrap();
        assert_eq!(labels.name(0), None);
        assert!(labels.name(1).is_some());
    }

    #[test]
    fn multi_candidate_leaves_draw_roughly_uniformly() {
        let table = PriorTable::from_csv_str("type,m\nA,0\nB,0\n").unwrap();
        let tree = MondrianTree::single_leaf(1.0, AxisBox::unit(1), table).unwrap();
        let data = CellMatrix::new(vec!["m".into()], vec![vec![0.5]]).unwrap();
        let draws = 10_000;
        let mut a = 0usize;
        for i in 0..draws {
            let mut rng = RandomSource::substream(99, i as u64);
            let labels = classify_sample(&tree, &data, &mut rng).unwrap();
            if labels.name(0) == Some("A") {
                a += 1;
            }
        }
        let freq = a as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
    }

    #[test]
    fn cells_in_the_same_leaf_share_the_draw() {
        let table = PriorTable::from_csv_str("type,m\nA,0\nB,0\n").unwrap();
        let tree = MondrianTree::single_leaf(1.0, AxisBox::unit(1), table).unwrap();
        let data = CellMatrix::new(
            vec!["m".into()],
            vec![vec![0.1], vec![0.5], vec![0.9]],
        )
        .unwrap();
        for seed in 0..20 {
            let mut rng = RandomSource::new(seed);
            let labels = classify_sample(&tree, &data, &mut rng).unwrap();
            assert_eq!(labels.name(0), labels.name(1));
            assert_eq!(labels.name(1), labels.name(2));
        }
    }

    #[test]
    fn single_candidate_trees_ignore_the_rng() {
        let table = tcell_table();
        let spec = TreeSpec::cut(
            2,
            0.5,
            0.01,
            TreeSpec::Leaf,
            TreeSpec::cut(0, 0.5, 0.01, TreeSpec::Leaf, TreeSpec::Leaf),
        );
        let tree = MondrianTree::from_spec(1.0, AxisBox::unit(3), &table, &spec).unwrap();
        let data = CellMatrix::new(
            vec!["CD4".into(), "CD8".into(), "CD3".into()],
            vec![vec![0.9, 0.1, 0.9], vec![0.1, 0.9, 0.9], vec![0.5, 0.5, 0.1]],
        )
        .unwrap();
        let mut rng_a = RandomSource::new(1);
        let mut rng_b = RandomSource::new(999);
        let a = classify_sample(&tree, &data, &mut rng_a).unwrap();
        let b = classify_sample(&tree, &data, &mut rng_b).unwrap();
        assert_eq!(a, b);
    }

    fn lv(names: &[&str], labels: &[Option<usize>]) -> LabelVector {
        LabelVector::new(
            names.iter().map(|s| s.to_string()).collect(),
            labels.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn voting_majority_and_ties() {
        let names = ["A", "B"];
        // Three samples over one cell: A, A, B.
        let samples = vec![
            lv(&names, &[Some(0)]),
            lv(&names, &[Some(0)]),
            lv(&names, &[Some(1)]),
        ];
        let voted = vote(&samples, &[-5.0, -6.0, -1.0]).unwrap();
        assert_eq!(voted.name(0), Some("A"));

        // Tie between A and B: the sample with log posterior -5 wins.
        let samples = vec![lv(&names, &[Some(0)]), lv(&names, &[Some(1)])];
        let voted = vote(&samples, &[-10.0, -5.0]).unwrap();
        assert_eq!(voted.name(0), Some("B"));
        let voted = vote(&samples, &[-5.0, -10.0]).unwrap();
        assert_eq!(voted.name(0), Some("A"));
    }

    #[test]
    fn voting_ignores_unknowns_until_nothing_remains() {
        let names = ["A"];
        let samples = vec![
            lv(&names, &[None]),
            lv(&names, &[Some(0)]),
            lv(&names, &[None]),
        ];
        let (voted, fractions) = vote_with_fractions(&samples, &[-1.0, -2.0, -3.0]).unwrap();
        assert_eq!(voted.name(0), Some("A"));
        assert!((fractions[0] - 1.0 / 3.0).abs() < 1e-12);

        let samples = vec![lv(&names, &[None]), lv(&names, &[None])];
        let (voted, fractions) = vote_with_fractions(&samples, &[-1.0, -2.0]).unwrap();
        assert_eq!(voted.name(0), None);
        assert_eq!(fractions[0], 1.0);
    }

    #[test]
    fn single_sample_vote_is_identity() {
        let sample = lv(&["A", "B"], &[Some(1), Some(0), None]);
        let voted = vote(std::slice::from_ref(&sample), &[-3.0]).unwrap();
        for i in 0..sample.len() {
            assert_eq!(voted.name(i), sample.name(i));
        }
    }

    #[test]
    fn vote_is_invariant_to_sample_order() {
        let names = ["A", "B", "C"];
        let samples = vec![
            lv(&names, &[Some(0), Some(2)]),
            lv(&names, &[Some(1), Some(2)]),
            lv(&names, &[Some(0), Some(1)]),
        ];
        let weights = [-4.0, -2.0, -9.0];
        let base = vote(&samples, &weights).unwrap();
        let perm = [2usize, 0, 1];
        let shuffled: Vec<LabelVector> = perm.iter().map(|&i| samples[i].clone()).collect();
        let shuffled_w: Vec<f64> = perm.iter().map(|&i| weights[i]).collect();
        let other = vote(&shuffled, &shuffled_w).unwrap();
        for i in 0..base.len() {
            assert_eq!(base.name(i), other.name(i));
        }
    }

    #[test]
    fn accuracy_counts_unknowns_as_wrong_unless_truth_agrees() {
        let pred = lv(&["A", "B"], &[Some(0), None, Some(1), None]);
        let truth = lv(&["A", "B"], &[Some(0), Some(1), Some(0), None]);
        // Matches: cell 0 (A == A) and cell 3 (unknown == unknown).
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.5);
        let short = lv(&["A"], &[Some(0)]);
        assert!(accuracy(&pred, &short).is_err());
    }

    #[test]
    fn accuracy_matches_by_name_across_universes() {
        let pred = lv(&["B", "A"], &[Some(1), Some(0)]);
        let truth = lv(&["A", "B"], &[Some(0), Some(1)]);
        assert_eq!(accuracy(&pred, &truth).unwrap(), 1.0);
    }
}
