//! Classify cells by voting across posterior samples, then examine the
//! result: overall accuracy, how unanimous the vote was, and where the
//! mistakes land (confusion table against the known truth).

use std::collections::BTreeMap;

use mondrian_gating::prelude::*;

fn main() -> Result<()> {
    let table = PriorTable::from_csv_str(
        "type,CD4,CD8,CD3\n\
         Basophils,0,-1,-1\n\
         CD4_T_cells,+1,-1,+1\n\
         CD8_T_cells,-1,+1,+1\n",
    )?;
    let hyper = Hyperparameters::default();

    let spec = SyntheticSpec::unit(table.n_markers(), 2_000, 3.0)?;
    let mut rng = RandomSource::new(19);
    let bench = generate_synthetic(&spec, &table, &hyper, &mut rng)?;

    let config = McmcConfig {
        chains: 16,
        iterations: 800,
        step_size: 0.05,
        seed: 19,
        prior_only: false,
    };
    let run = fit_mp_gmm(&bench.cells, &table, &hyper, &config)?;
    let samples: Vec<(usize, &MondrianTree, f64)> = run
        .samples
        .iter()
        .map(|s| (s.chain, &s.tree, s.log_posterior()))
        .collect();
    let (voted, fractions, per_sample) = classify_posterior(&samples, &bench.cells, 19)?;

    println!(
        "voted accuracy over {} samples: {:.4}",
        per_sample.len(),
        accuracy(&voted, &bench.truth)?
    );

    // How unanimous was the vote for each cell?
    let mut bins = [0usize; 5];
    for &f in &fractions {
        let b = ((f * 5.0).floor() as usize).min(4);
        bins[b] += 1;
    }
    println!("\nvote agreement (fraction of samples backing the winner):");
    for (b, count) in bins.iter().enumerate() {
        println!(
            "  {:.1} - {:.1}: {count:>5} cells",
            b as f64 / 5.0,
            (b + 1) as f64 / 5.0
        );
    }

    let mut confusion: BTreeMap<(String, String), usize> = BTreeMap::new();
    for i in 0..voted.len() {
        let truth = bench.truth.name(i).unwrap_or("UNKNOWN").to_string();
        let vote = voted.name(i).unwrap_or("UNKNOWN").to_string();
        *confusion.entry((truth, vote)).or_insert(0) += 1;
    }
    println!("\nconfusion (truth -> voted):");
    for ((truth, vote), count) in &confusion {
        let mark = if truth == vote { " " } else { "*" };
        println!("{mark} {truth:>12} -> {vote:>12}: {count}");
    }
    Ok(())
}
