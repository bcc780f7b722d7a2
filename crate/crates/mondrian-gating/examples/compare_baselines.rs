//! Score the fitted model against the two reference methods — an
//! unsupervised Gaussian mixture and voting over trees drawn straight
//! from the prior — on the same bench, at an easy and a hard separation.

use mondrian_gating::pipeline::{accuracy_to_text, MethodAccuracy};
use mondrian_gating::prelude::*;

fn main() -> Result<()> {
    let table = PriorTable::from_csv_str(
        "type,CD4,CD8,CD3\n\
         Basophils,0,-1,-1\n\
         CD4_T_cells,+1,-1,+1\n\
         CD8_T_cells,-1,+1,+1\n",
    )?;
    let hyper = Hyperparameters::default();

    for separation in [2.0, 4.0] {
        let spec = SyntheticSpec::unit(table.n_markers(), 3_000, separation)?;
        let mut rng = RandomSource::substream(914, 0);
        let bench = generate_synthetic(&spec, &table, &hyper, &mut rng)?;

        // Fitted model: MCMC over cut positions, then a vote.
        let config = McmcConfig {
            chains: 20,
            iterations: 2_000,
            step_size: 0.05,
            seed: 914,
            prior_only: false,
        };
        let run = fit_mp_gmm(&bench.cells, &table, &hyper, &config)?;
        let samples: Vec<(usize, &MondrianTree, f64)> = run
            .samples
            .iter()
            .map(|s| (s.chain, &s.tree, s.log_posterior()))
            .collect();
        let (fitted, _, _) = classify_posterior(&samples, &bench.cells, 914)?;

        // Reference 1: Gaussian mixture with as many components as types,
        // matched to type names through the prior table's signatures.
        let gmm = gmm_em_fit(&bench.cells, table.n_types(), 914)?;
        let gmm_labels = gmm_classify(&gmm, &bench.cells, &table)?;

        // Reference 2: the same voting pipeline without ever fitting,
        // trees drawn from the prior alone.
        let prior_labels = mp_prior_classify(&bench.cells, &table, &hyper, 20, 914)?;

        let rows = vec![
            MethodAccuracy {
                method: "MP-GMM".into(),
                accuracy: accuracy(&fitted, &bench.truth)?,
            },
            MethodAccuracy {
                method: "GMM".into(),
                accuracy: accuracy(&gmm_labels, &bench.truth)?,
            },
            MethodAccuracy {
                method: "MP-Prior".into(),
                accuracy: accuracy(&prior_labels, &bench.truth)?,
            },
        ];
        println!("separation {separation}:");
        println!("{}", accuracy_to_text(&rows));
    }
    Ok(())
}
