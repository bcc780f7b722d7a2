//! Render the posterior's cut positions over a two-marker scatter of
//! the cells as a standalone SVG file.

use std::fs;
use std::path::Path;

use mondrian_gating::prelude::*;

fn main() -> Result<()> {
    let table = PriorTable::from_csv_str(
        "type,CD4,CD8,CD3\n\
         Basophils,0,-1,-1\n\
         CD4_T_cells,+1,-1,+1\n\
         CD8_T_cells,-1,+1,+1\n",
    )?;
    let hyper = Hyperparameters::default();

    let spec = SyntheticSpec::unit(table.n_markers(), 1_200, 3.0)?;
    let mut rng = RandomSource::new(33);
    let bench = generate_synthetic(&spec, &table, &hyper, &mut rng)?;

    let config = McmcConfig {
        chains: 10,
        iterations: 500,
        step_size: 0.05,
        seed: 33,
        prior_only: false,
    };
    let run = fit_mp_gmm(&bench.cells, &table, &hyper, &config)?;
    let trees: Vec<&MondrianTree> = run.samples.iter().map(|s| &s.tree).collect();

    // Project onto CD4 (x) and CD8 (y); every sample's cuts overlay the
    // same scatter, so dense line bundles mark confident cut positions.
    let x = table.marker_index("CD4").expect("CD4 in table");
    let y = table.marker_index("CD8").expect("CD8 in table");
    let svg = render_posterior_cuts(&trees, &bench.cells, x, y)?;

    let dir = Path::new("target/example-out/plot_cuts");
    fs::create_dir_all(dir).expect("create output directory");
    let path = dir.join("cuts.svg");
    fs::write(&path, &svg).expect("write svg");
    println!(
        "rendered {} posterior samples over {} cells to {}",
        trees.len(),
        bench.cells.n_cells(),
        path.display()
    );
    Ok(())
}
