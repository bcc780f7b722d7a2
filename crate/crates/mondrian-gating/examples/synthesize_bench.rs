//! Generate labeled synthetic cytometry benches at two cluster
//! separations and write them as CSV files a fit can ingest.

use std::fs;
use std::path::Path;

use mondrian_gating::pipeline::truth_to_csv;
use mondrian_gating::prelude::*;

fn type_counts(truth: &LabelVector) -> Vec<(String, usize)> {
    let mut counts: Vec<(String, usize)> = truth.names().iter().map(|n| (n.clone(), 0)).collect();
    for i in 0..truth.len() {
        if let Some(name) = truth.name(i) {
            if let Some(entry) = counts.iter_mut().find(|(n, _)| n == name) {
                entry.1 += 1;
            }
        }
    }
    counts
}

fn main() -> Result<()> {
    let table = PriorTable::from_csv_str(
        "type,CD4,CD8,CD3\n\
         Basophils,0,-1,-1\n\
         CD4_T_cells,+1,-1,+1\n\
         CD8_T_cells,-1,+1,+1\n",
    )?;
    let hyper = Hyperparameters::default();
    let out_root = Path::new("target/example-out/synthesize_bench");

    for separation in [2.0, 4.0] {
        let spec = SyntheticSpec::unit(table.n_markers(), 1_000, separation)?;
        let mut rng = RandomSource::new(42);
        let bench = generate_synthetic(&spec, &table, &hyper, &mut rng)?;

        println!(
            "separation {separation}: generating tree has {} leaves",
            bench.tree.leaf_count()
        );
        for (name, count) in type_counts(&bench.truth) {
            println!("  {count:>4} cells of {name}");
        }
        println!(
            "  first cell: {:?} -> {}",
            bench.cells.row(0),
            bench.truth.name(0).unwrap_or("UNKNOWN")
        );

        let dir = out_root.join(format!("separation_{separation}"));
        fs::create_dir_all(&dir).expect("create output directory");
        fs::write(dir.join("cells.csv"), bench.cells.to_csv_string()).expect("write cells");
        fs::write(dir.join("truth.csv"), truth_to_csv(&bench.truth)).expect("write truth");
        println!("  wrote {}", dir.display());
    }
    Ok(())
}
