//! Draw axis-aligned partitions from the marker-informed prior and show
//! how the prior table shapes them: which markers get cut often, where
//! the cuts tend to land, and which cell types each region can hold.

use mondrian_gating::prelude::*;
use mondrian_gating::table::{cut_beta_params, dimension_weights};

fn main() -> Result<()> {
    // CD4/CD8/CD3 each separate some pair of types (both -1 and +1 appear
    // in the column), so they get the high cut rate and a symmetric cut
    // law. CD19 is low-or-irrelevant for every type: rarely cut, and when
    // cut, biased toward the low end of the axis.
    let table = PriorTable::from_csv_str(
        "type,CD4,CD8,CD3,CD19\n\
         Basophils,0,-1,-1,0\n\
         CD4_T_cells,+1,-1,+1,-1\n\
         CD8_T_cells,-1,+1,+1,-1\n",
    )?;
    let hyper = Hyperparameters::default();

    println!("markers and the cut behavior the table implies:");
    let weights = dimension_weights(&table, &hyper);
    for (d, marker) in table.markers().iter().enumerate() {
        let labels = table.label_set(d);
        let (alpha, beta) = cut_beta_params(labels, &hyper);
        println!(
            "  {marker:>4}: cut rate weight {:>5.1}, cut position ~ Beta({alpha}, {beta})",
            weights[d]
        );
    }

    let domain = AxisBox::unit(table.n_markers());
    for seed in 0..3u64 {
        let mut rng = RandomSource::new(seed);
        let tree = sample_mondrian(hyper.budget, &domain, &table, &hyper, &mut rng)?;
        println!(
            "\nseed {seed}: {} leaves, {} cuts",
            tree.leaf_count(),
            tree.internal_count()
        );
        for leaf in tree.leaves() {
            let lo = leaf.bounds.lower_bounds();
            let hi = leaf.bounds.upper_bounds();
            let span: Vec<String> = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| format!("[{a:.2}, {b:.2})"))
                .collect();
            println!(
                "  leaf {:>4}  {}  candidates: {}",
                leaf.path.to_string(),
                span.join(" x "),
                leaf.table.types().join(", ")
            );
        }
    }

    let mut rng = RandomSource::new(0);
    let tree = sample_mondrian(hyper.budget, &domain, &table, &hyper, &mut rng)?;
    println!("\nGraphviz view of the seed-0 tree:\n{}", tree_to_dot(&tree));
    Ok(())
}
