use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dforge_core::pipeline::{ConformanceReport, Decision, MappingProposal, Outcome, TransferReceipt};
use dforge_core::repository::{BulkOutcome, CubeViewDoc, RepositoryStore, StakeholderView};

use crate::service::{self, DecisionRequest, ErrorKind, ServiceError};
use crate::{http, repo, DEFAULT_TEMPLATE_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    JsonLines,
    Human,
}

#[derive(Debug, Parser)]
#[command(name = "dforge", version, about = "Plan templates to agent-based models to a knowledge repository")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "human")]
    pub format: Format,
    /// Repository file.
    #[arg(long, global = true, env = "DFORGE_REPO", default_value = "dforge-repo.jsonl")]
    pub repo: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a plan template and list its elements.
    Parse { template: PathBuf },
    /// Build template-level models from a plan template.
    Customise {
        template: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Bind placeholders and write the instance models.
    Instantiate {
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        binding: PathBuf,
        /// Placeholder that may stay unbound; repeatable.
        #[arg(long = "allow-unbound")]
        allow_unbound: Vec<String>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Check instance models against their template models. Exits 1 on findings.
    Conform {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        template: PathBuf,
    },
    /// Register instance models and create mapping proposals.
    Propose {
        #[arg(long)]
        instance: PathBuf,
        /// Template models the instance was made from; their plan id is recorded.
        #[arg(long, conflicts_with = "template_id")]
        template: Option<PathBuf>,
        #[arg(long)]
        template_id: Option<String>,
    },
    /// Decide on mapping proposals.
    Confirm(ConfirmArgs),
    /// Move confirmed units into the cube.
    Transfer {
        #[arg(long)]
        plan: Option<String>,
    },
    /// Show the cube with some axes fixed.
    Query {
        #[arg(long)]
        phase: Option<String>,
        #[arg(long)]
        mof: Option<String>,
        #[arg(long)]
        tag: Option<String>,
    },
    /// Seven-facet view for a goal in one phase.
    View {
        #[arg(long)]
        plan: String,
        #[arg(long)]
        phase: String,
        #[arg(long)]
        goal: String,
    },
    /// Write the repository document.
    Export {
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Replace the repository with a verified document.
    Import { file: PathBuf },
    /// Serve the HTTP API over the repository file.
    Serve {
        #[arg(long, env = "DFORGE_ADDR", default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("target").required(true).args(["proposal", "all_accept_top"])))]
#[command(group(ArgGroup::new("choice").args(["accept_top", "select", "reject"])))]
pub struct ConfirmArgs {
    /// Who is deciding; recorded in the audit log.
    #[arg(long, required = true)]
    pub actor: String,
    /// Decision time (RFC 3339); defaults to now.
    #[arg(long)]
    pub at: Option<DateTime<Utc>>,
    /// Proposal to decide.
    #[arg(long, requires = "choice")]
    pub proposal: Option<String>,
    /// Accept the highest-ranked candidate.
    #[arg(long)]
    pub accept_top: bool,
    /// Map to this concept id.
    #[arg(long, value_name = "CONCEPT")]
    pub select: Option<String>,
    /// Reason for selecting a concept that is not a candidate.
    #[arg(long, requires = "select")]
    pub reason: Option<String>,
    /// Keep the element out of the repository.
    #[arg(long, value_name = "REASON")]
    pub reject: Option<String>,
    /// Accept the top candidate of every pending proposal.
    #[arg(long, conflicts_with = "choice")]
    pub all_accept_top: bool,
    /// Limit `--all-accept-top` to one plan.
    #[arg(long, requires = "all_accept_top")]
    pub plan: Option<String>,
}

/// Runs the command line. Returns the exit code: 0 on success, 1 on a
/// domain error, 2 on a usage error.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return if code == 0 { 0 } else { 2 };
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        // The reader went away (`| head`); nothing left to report to.
        Err(e) if e.code == "broken-pipe" => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            if !e.detail.is_null() {
                let _ = writeln!(err, "{}", e.detail);
            }
            1
        }
    }
}

fn read(path: &Path) -> Result<String, ServiceError> {
    fs::read_to_string(path).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "io", format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), ServiceError> {
    fs::write(path, text).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "io", format!("{}: {e}", path.display())))
}

fn save(path: &Path, store: &RepositoryStore) -> Result<(), ServiceError> {
    repo::save(path, store).map_err(|e| ServiceError::new(ErrorKind::Conflict, "save-failed", format!("{}: {e}", path.display())))
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> Result<(), ServiceError> {
    let line = serde_json::to_string(value).expect("outputs serialize");
    writeln!(out, "{line}").map_err(io_err)
}

fn io_err(e: std::io::Error) -> ServiceError {
    let code = if e.kind() == std::io::ErrorKind::BrokenPipe { "broken-pipe" } else { "io" };
    ServiceError::new(ErrorKind::BadRequest, code, e)
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(io_err)?
    };
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, ServiceError> {
    let json = cli.format == Format::JsonLines;
    match cli.command {
        Command::Parse { template } => {
            let t = service::parse_template(&read(&template)?)?;
            if json {
                for e in t.elements() {
                    json_line(out, e)?;
                }
            } else {
                say!(out, "{}", t.title());
                let phases: Vec<String> = t.phases_covered().iter().map(|p| p.to_string()).collect();
                say!(out, "phases: {}", phases.join(", "));
                let names: Vec<&str> = t.placeholders().iter().map(|p| p.name.as_str()).collect();
                say!(out, "placeholders: {}", names.join(", "));
                for e in t.elements() {
                    let first = e.text.lines().next().unwrap_or_default();
                    say!(out, "{}  {}  {}", e.id, e.section_path.join(" / "), first);
                }
            }
        }
        Command::Customise { template, out: dest } => {
            let c = service::customise_template(&read(&template)?)?;
            match &dest {
                Some(p) => write_file(p, &c.document)?,
                None => out.write_all(c.document.as_bytes()).map_err(io_err)?,
            }
            if dest.is_some() {
                if json {
                    for p in &c.pruned {
                        json_line(out, p)?;
                    }
                } else {
                    say!(out, "{}: {} elements kept, {} pruned", c.plan_id, c.marks.len(), c.pruned.len());
                    for p in &c.pruned {
                        say!(out, "  pruned {} ({}): {}", p.element, p.section_path.join(" / "), p.reason);
                    }
                }
            }
        }
        Command::Instantiate { template, binding, allow_unbound, out: dest } => {
            let i = service::instantiate_models(&read(&template)?, &read(&binding)?, &allow_unbound)?;
            match &dest {
                Some(p) => write_file(p, &i.document)?,
                None => out.write_all(i.document.as_bytes()).map_err(io_err)?,
            }
            if dest.is_some() {
                if json {
                    json_line(out, &serde_json::json!({ "plan_id": i.plan_id, "warnings": i.warnings }))?;
                } else {
                    say!(out, "instantiated plan {}", i.plan_id);
                    for w in &i.warnings {
                        say!(out, "  warning: {w}");
                    }
                }
            }
        }
        Command::Conform { instance, template } => {
            let report = service::conform(&read(&instance)?, &read(&template)?)?;
            if json {
                json_line(out, &report)?;
            } else {
                print_report(out, &report)?;
            }
            return Ok(if report.conforms() { 0 } else { 1 });
        }
        Command::Propose { instance, template, template_id } => {
            let template_id = match (template, template_id) {
                (Some(t), _) => service::parse_models(&read(&t)?)?.plan_id,
                (None, Some(id)) => id,
                (None, None) => DEFAULT_TEMPLATE_ID.to_string(),
            };
            let doc = read(&instance)?;
            let mut store = repo::load(&cli.repo)?;
            let proposals = service::register_plan(&mut store, &doc, &template_id)?;
            save(&cli.repo, &store)?;
            print_proposals(out, json, &proposals)?;
        }
        Command::Confirm(args) => {
            let mut store = repo::load(&cli.repo)?;
            if args.all_accept_top {
                let bulk = service::accept_top(&mut store, args.plan.as_deref(), &args.actor, args.at)?;
                save(&cli.repo, &store)?;
                print_bulk(out, json, &bulk)?;
            } else {
                let id = args.proposal.expect("clap requires a target");
                let decision = match (args.accept_top, args.select, args.reject) {
                    (true, _, _) => Decision::AcceptTop,
                    (_, Some(concept), _) => Decision::Select { concept, reason: args.reason },
                    (_, _, Some(reason)) => Decision::Reject { reason },
                    _ => unreachable!("clap requires a choice"),
                };
                let req = DecisionRequest { decision, actor: args.actor, at: args.at };
                let outcome = service::decide(&mut store, &id, req)?;
                save(&cli.repo, &store)?;
                if json {
                    json_line(out, &outcome)?;
                } else {
                    print_outcome(out, &outcome)?;
                }
            }
        }
        Command::Transfer { plan } => {
            let mut store = repo::load(&cli.repo)?;
            let receipt = service::transfer(&mut store, plan.as_deref())?;
            save(&cli.repo, &store)?;
            if json {
                json_line(out, &receipt)?;
            } else {
                print_receipt(out, &receipt)?;
            }
        }
        Command::Query { phase, mof, tag } => {
            let slice = service::slice(phase.as_deref(), mof.as_deref(), tag.as_deref())?;
            let store = repo::load(&cli.repo)?;
            let doc = service::cube(&store, slice);
            if json {
                json_line(out, &doc)?;
            } else {
                print_cube(out, &doc)?;
            }
        }
        Command::View { plan, phase, goal } => {
            let phase = service::parse_phase(&phase)?;
            let store = repo::load(&cli.repo)?;
            let v = service::stakeholder_view(&store, &plan, &goal, phase)?;
            if json {
                json_line(out, &v)?;
            } else {
                print_view(out, &v)?;
            }
        }
        Command::Export { out: dest } => {
            let doc = repo::load(&cli.repo)?.export();
            match dest {
                Some(p) => write_file(&p, &doc)?,
                None => out.write_all(doc.as_bytes()).map_err(io_err)?,
            }
        }
        Command::Import { file } => {
            let store = service::import(&read(&file)?)?;
            save(&cli.repo, &store)?;
            if json {
                json_line(out, &serde_json::json!({ "plans": store.plans().count(), "units": store.unit_count() }))?;
            } else {
                say!(out, "imported {} plans, {} units", store.plans().count(), store.unit_count());
            }
        }
        Command::Serve { addr } => {
            let store = repo::load(&cli.repo)?;
            let state = http::AppState::new(store, Some(cli.repo.clone()));
            let rt = tokio::runtime::Runtime::new().map_err(io_err)?;
            rt.block_on(http::serve(&addr, state)).map_err(io_err)?;
        }
    }
    Ok(0)
}

fn print_report(out: &mut dyn Write, r: &ConformanceReport) -> Result<(), ServiceError> {
    if r.conforms() {
        say!(out, "{} conforms to {}", r.plan_id, r.template_id);
    } else {
        say!(out, "{} does not conform to {}: {} findings", r.plan_id, r.template_id, r.findings.len());
        for f in &r.findings {
            say!(out, "  {} {:?}: {}", f.element, f.kind, f.detail);
        }
    }
    for (k, v) in &r.inferred {
        say!(out, "  <{k}> = {v}");
    }
    Ok(())
}

fn print_proposals(out: &mut dyn Write, json: bool, proposals: &[MappingProposal]) -> Result<(), ServiceError> {
    for p in proposals {
        if json {
            json_line(out, p)?;
        } else {
            let top = p.candidates.first().map(|c| format!("{} ({:.4})", c.concept, c.score)).unwrap_or_else(|| "-".into());
            say!(out, "{}  [{} {} {}]  {}  -> {}", p.id, p.phase, p.mof, p.element.kind, p.text, top);
        }
    }
    Ok(())
}

fn print_outcome(out: &mut dyn Write, o: &Outcome) -> Result<(), ServiceError> {
    match o {
        Outcome::Unit(u) => say!(out, "{} -> {} at {}", u.element.element, u.concept, u.cell),
        Outcome::Rejection(r) => say!(out, "{} rejected: {}", r.proposal, r.reason),
    }
    Ok(())
}

fn print_bulk(out: &mut dyn Write, json: bool, b: &BulkOutcome) -> Result<(), ServiceError> {
    if json {
        return json_line(out, b);
    }
    for o in &b.outcomes {
        print_outcome(out, o)?;
    }
    for s in &b.skipped {
        say!(out, "{s} skipped: no candidates");
    }
    say!(out, "{} accepted, {} skipped", b.outcomes.len(), b.skipped.len());
    Ok(())
}

fn print_receipt(out: &mut dyn Write, r: &TransferReceipt) -> Result<(), ServiceError> {
    for c in &r.inserted {
        say!(out, "{}  +{}", c.cell, c.count);
    }
    say!(out, "{} units transferred, {} already present", r.total_inserted(), r.already_present);
    Ok(())
}

fn print_cube(out: &mut dyn Write, doc: &CubeViewDoc) -> Result<(), ServiceError> {
    let free: Vec<String> = doc.free.iter().map(|a| a.to_string()).collect();
    say!(out, "{} units; free axes: {}", doc.total, free.join(", "));
    for g in &doc.groups {
        let key: Vec<String> = [
            g.key.phase.map(|p| p.to_string()),
            g.key.mof.map(|m| m.to_string()),
            g.key.tag.map(|t| t.to_string()),
        ]
        .into_iter()
        .flatten()
        .collect();
        say!(out, "({})  {}", key.join(", "), g.count);
        for u in &g.units {
            say!(out, "  {}  {}", u.unit_id, u.concept);
        }
    }
    Ok(())
}

fn print_view(out: &mut dyn Write, v: &StakeholderView) -> Result<(), ServiceError> {
    say!(out, "{} / {} / {}", v.plan_id, v.phase, v.goal);
    for (name, entries) in v.facets() {
        say!(out, "{name}:");
        for e in entries {
            say!(out, "  {}", e.label);
            for d in &e.detail {
                say!(out, "    {d}");
            }
        }
    }
    Ok(())
}
