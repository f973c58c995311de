//! The five experiments. Each takes a validated [`Plan`] and a seed and
//! returns a [`Table`]; all randomness comes from child streams of
//! `Rng::new(seed)`, so output is a pure function of the configuration.

use gptt_audit::attack::{ordering_lemma_rate, reconstruct, reconstruction_theorem_check};
use gptt_audit::audit::{
    exact_output_probability_hard, mc_audit, mechanism_output_frequency, quadrature_audit, CounterexampleSpec,
    Database,
};
use gptt_audit::mechanisms::{gptt, gptt_amplified_transcript, svt};
use gptt_audit::{Query, Rng};

use crate::config::{theorem_level, Plan, Resolved};
use crate::error::CliError;
use crate::table::{Cell, Table};

pub fn run(resolved: &Resolved) -> Result<Table, CliError> {
    let name = resolved.experiment.name();
    let seed = resolved.seed;
    let base = Rng::new(seed);
    match &resolved.plan {
        Plan::ViolationCurve {
            epsilon1,
            epsilon2,
            t_grid,
            n_trials,
        } => {
            let mut table = Table::new(
                name,
                seed,
                &["t", "log_ratio_quadrature", "log_ratio_mc", "mc_std_error", "reference_2eps1"],
            );
            for (i, &t) in t_grid.iter().enumerate() {
                let spec = CounterexampleSpec::new(t, *epsilon1, *epsilon2)?;
                let quad = quadrature_audit(&spec)?;
                let mc = mc_audit(&spec, *n_trials, &base.child(i as u64))?;
                table.push(vec![
                    t.into(),
                    quad.log_ratio().into(),
                    mc.log_ratio().into(),
                    mc.log_ratio_std_error().into(),
                    (2.0 * epsilon1).into(),
                ]);
            }
            Ok(table)
        }

        Plan::HardViolation { epsilons, n_trials } => {
            let mut table = Table::new(
                name,
                seed,
                &["epsilon1", "prob_d", "prob_dprime", "freq_d", "freq_d_std_error", "freq_dprime"],
            );
            for (i, &e1) in epsilons.iter().enumerate() {
                let (p_d, p_dp) = exact_output_probability_hard(e1)?;
                let spec = CounterexampleSpec::new(1, e1, f64::INFINITY)?;
                let i = i as u64;
                let freq_d = mechanism_output_frequency(&spec, Database::D, *n_trials, &base.child(2 * i))?;
                let freq_dp = mechanism_output_frequency(&spec, Database::DPrime, *n_trials, &base.child(2 * i + 1))?;
                table.push(vec![
                    e1.into(),
                    p_d.into(),
                    p_dp.into(),
                    freq_d.mean().into(),
                    freq_d.std_error().into(),
                    freq_dp.mean().into(),
                ]);
            }
            Ok(table)
        }

        Plan::ReconstructionTable {
            source,
            epsilons,
            delta,
            split,
            n_trials,
        } => {
            let data = source.load(&mut base.child(0))?;
            let mut table = Table::new(
                name,
                seed,
                &["dataset", "epsilon", "overall_accuracy", "small_count_accuracy", "mean_blocks"],
            );
            let trials = base.child(1);
            for (e, &eps) in epsilons.iter().enumerate() {
                let streams = trials.child(e as u64);
                let (mut overall, mut blocks) = (0.0, 0.0);
                let mut small = Vec::new();
                for trial in 0..*n_trials {
                    let r = reconstruct(&data.db, eps, *delta, *split, &mut streams.child(trial))?;
                    overall += r.overall_accuracy;
                    blocks += r.n_blocks as f64;
                    small.extend(r.small_count_accuracy);
                }
                let n = *n_trials as f64;
                let small_mean = (!small.is_empty()).then(|| small.iter().sum::<f64>() / small.len() as f64);
                table.push(vec![
                    data.meta.name.as_str().into(),
                    eps.into(),
                    (overall / n).into(),
                    small_mean.into(),
                    (blocks / n).into(),
                ]);
            }
            Ok(table)
        }

        Plan::TheoremCheck {
            source,
            k,
            epsilon,
            delta,
            n_trials,
        } => {
            let data = source.load(&mut base.child(0))?;
            let k = theorem_level(&data, *k)?;
            let check = reconstruction_theorem_check(&data.db, k, *epsilon, *delta, *n_trials, &base.child(1))?;
            let ordering = ordering_lemma_rate(&data.db, *epsilon, *delta, *n_trials, &base.child(2))?;
            let mut table = Table::new(
                name,
                seed,
                &["dataset", "k", "alpha", "m", "n_trials", "fraction", "ordering_rate"],
            );
            table.push(vec![
                data.meta.name.as_str().into(),
                k.into(),
                check.alpha.into(),
                check.m.into(),
                check.n_trials.into(),
                check.fraction.into(),
                ordering.into(),
            ]);
            Ok(table)
        }

        Plan::MechanismDemo {
            db,
            svt: svt_params,
            gptt: gptt_params,
            copies,
        } => {
            let queries: Vec<Query> = (0..db.domain_size()).map(Query::count).collect();
            let svt_out = svt(db, &queries, svt_params, &mut base.child(0))?;
            let gptt_out = gptt(db, &queries, gptt_params, &mut base.child(1))?;
            let amp = gptt_amplified_transcript(db, &queries, gptt_params, *copies, &mut base.child(2))?;
            let mut table = Table::new(
                name,
                seed,
                &[
                    "index",
                    "count",
                    "svt_answer",
                    "gptt_answer",
                    "gptt_noisy_query",
                    "gptt_noisy_threshold",
                    "amplified_answer",
                    "amplified_top_votes",
                ],
            );
            for (i, &count) in db.counts().iter().enumerate() {
                let svt_answer = svt_out.answers.get(i).map_or(Cell::Missing, |a| a.to_string().as_str().into());
                table.push(vec![
                    i.into(),
                    count.into(),
                    svt_answer,
                    gptt_out.answers.answers[i].to_string().as_str().into(),
                    gptt_out.noisy_queries[i].into(),
                    gptt_out.noisy_threshold.into(),
                    amp.answers.answers[i].to_string().as_str().into(),
                    amp.top_votes[i].into(),
                ]);
            }
            Ok(table)
        }
    }
}
