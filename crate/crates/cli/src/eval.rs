//! `uno eval`: head-to-head matches between checkpoints and random play.

use uno_core::agents::{GreedyPolicy, Policy, RandomPolicy};
use uno_core::eval::{export_report, play_match, EvalReport};
use uno_core::neural::{load_checkpoint, DEFAULT_LAYERS};

use crate::{CliError, EvalArgs};

/// Loads one seat: `random` or a checkpoint played greedily.
pub fn load_agent(spec: &str) -> Result<Box<dyn Policy>, CliError> {
    if spec == "random" {
        return Ok(Box::new(RandomPolicy));
    }
    let ckpt = load_checkpoint(spec, Some(&DEFAULT_LAYERS))
        .map_err(|e| CliError::Runtime(format!("incompatible checkpoint {spec}: {e}")))?;
    let name = format!("{}@{}", ckpt.meta.algorithm, ckpt.meta.episode);
    Ok(Box::new(GreedyPolicy::new(ckpt.net, name)))
}

pub fn format_report(report: &EvalReport, specs: &[String]) -> String {
    let mut s = format!(
        "{} games, seed {}, seat rotation {}\n",
        report.num_games,
        report.seed,
        if report.seat_rotation { "on" } else { "off" }
    );
    s.push_str("agent  wins      win rate          avg reward  source\n");
    for (a, spec) in report.agents.iter().zip(specs) {
        s.push_str(&format!(
            "{:<5}  {:<8}  {:.4} ± {:.4}   {:+.4}     {}\n",
            a.agent, a.wins, a.win_rate, a.ci95, a.avg_reward, spec
        ));
    }
    s
}

pub fn cmd_eval(args: &EvalArgs) -> Result<(), CliError> {
    if args.games == 0 {
        return Err(CliError::Usage("--games must be positive".into()));
    }
    let agents = args
        .agents
        .iter()
        .map(|s| load_agent(s))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&dyn Policy> = agents.iter().map(|a| a.as_ref()).collect();
    let report =
        play_match(&refs, args.games, args.seed, !args.no_rotate).map_err(|e| CliError::Usage(e.to_string()))?;
    print!("{}", format_report(&report, &args.agents));
    if let Some(path) = &args.csv {
        export_report(path, &report).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
