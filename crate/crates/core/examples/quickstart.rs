//! Estimates a greedy policy's value on a random discrete problem.

use dreval::dgp::{
    make_discrete_dgp, policy_value_exact, sample_log, DgpSpec, TablePolicy, TableReward,
};
use dreval::estimators::{dm_estimate, dr_estimate, ips_estimate};
use dreval::policy::{argmax, LoggedPropensity};

fn main() -> dreval::Result<()> {
    let dgp = make_discrete_dgp(&DgpSpec {
        seed: 7,
        ..Default::default()
    })?;

    // a reward model that is off by 0.1 everywhere
    let table: Vec<Vec<f64>> = dgp
        .r_star_table()
        .iter()
        .map(|row| row.iter().map(|r| (r + 0.1).min(1.0)).collect())
        .collect();
    let greedy: Vec<usize> = table.iter().map(|row| argmax(row)).collect();
    let target = TablePolicy::deterministic(&greedy, table[0].len());
    let reward = TableReward::new(table);

    let log = sample_log(&dgp, 2000, 1);
    println!("true {:.4}", policy_value_exact(&dgp, &target));
    println!("DM   {:.4}", dm_estimate(&log, &target, &reward)?.estimate);
    println!(
        "IPS  {:.4}",
        ips_estimate(&log, &target, &LoggedPropensity)?.estimate
    );
    println!(
        "DR   {:.4}",
        dr_estimate(&log, &target, &reward, &LoggedPropensity)?.estimate
    );
    Ok(())
}
