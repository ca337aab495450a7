//! `draftsman`: command-line client for the drafting service.
//!
//! Everything except `init` and `serve` goes over HTTP to `--server`.

mod edit;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use draftsman_client::{Client, ClientError};
use draftsman_core::{fixtures, Engine, ErrorBody, GenericDocument, QueryFilter, RenderFormat, Rendered, Store};
use serde::Serialize;

use crate::edit::EditOp;
use crate::output::{say, say_raw, Out};

#[derive(Debug, Parser)]
#[command(name = "draftsman", version, about = "Assemble contracts from generic documents")]
struct Cli {
    /// Service base URL.
    #[arg(long, global = true, env = "DRAFTSMAN_SERVER", default_value = "http://127.0.0.1:7878")]
    server: String,
    /// Print response bodies as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Create a store directory, optionally with the sample generics and instances.
    Init {
        dir: PathBuf,
        #[arg(long)]
        fixtures: bool,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value = draftsman_server::DEFAULT_ADDR)]
        addr: String,
    },
    #[command(subcommand)]
    Generic(GenericCmd),
    #[command(subcommand)]
    Draft(DraftCmd),
    /// Print a stored instance.
    Render {
        id: String,
        #[arg(long)]
        markup: bool,
    },
    /// List stored instances matching every given criterion.
    Query(QueryArgs),
    /// Print the full text of a stored instance.
    Expand { id: String },
    /// Check the store for dangling references.
    Fsck,
}

#[derive(Debug, Subcommand)]
enum GenericCmd {
    List,
    Show { doc_type: String },
    /// Import a generic document from a JSON file.
    Import { file: PathBuf },
    /// Validate a generic document JSON file without storing it.
    Validate { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum DraftCmd {
    /// Start a drafting session.
    New {
        doc_type: String,
        /// Instance id prefix (default Q).
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Show the state of a session.
    Resume { session: String },
    /// Apply one edit to a session.
    Edit {
        session: String,
        #[command(subcommand)]
        op: EditOp,
    },
    Check { session: String },
    Finalize { session: String },
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    doc_type: Option<String>,
    #[arg(long)]
    category: Option<String>,
    /// YYYY-MM or YYYY-MM-DD; applies to --before and --after too.
    #[arg(long)]
    on: Option<String>,
    #[arg(long)]
    before: Option<String>,
    #[arg(long)]
    after: Option<String>,
    #[arg(long)]
    party_name: Option<String>,
    #[arg(long)]
    party_address: Option<String>,
    /// Restrict party criteria to party 1 or 2.
    #[arg(long)]
    party: Option<String>,
    #[arg(long)]
    keyword: Vec<String>,
    /// Unit version as `Path/To/Unit@N`.
    #[arg(long)]
    contains: Vec<String>,
    /// `duty|right[:party[:label]]`.
    #[arg(long)]
    tag: Option<String>,
}

impl QueryArgs {
    fn params(&self) -> Vec<(&'static str, String)> {
        let singles = [
            ("doc_type", &self.doc_type),
            ("category", &self.category),
            ("on", &self.on),
            ("before", &self.before),
            ("after", &self.after),
            ("party_name", &self.party_name),
            ("party_address", &self.party_address),
            ("party", &self.party),
            ("tag", &self.tag),
        ];
        let mut out: Vec<_> = singles
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        out.extend(self.keyword.iter().map(|k| ("keyword", k.clone())));
        out.extend(self.contains.iter().map(|c| ("contains", c.clone())));
        out
    }
}

/// How a command failed; decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Client(ClientError),
    Local(String),
    /// Already reported on stdout.
    Reported,
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Client(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Client(ClientError::Api { status: 400, .. }) | Failure::Client(ClientError::BadBase(_)) => 2,
            _ => 1,
        }
    }

    fn body(&self) -> ErrorBody {
        match self {
            Failure::Client(ClientError::Api { body, .. }) => (**body).clone(),
            Failure::Client(e) => ErrorBody::new("transport_error", e.to_string()),
            Failure::Usage(m) => ErrorBody::new("usage", m.clone()),
            Failure::Local(m) => ErrorBody::new("local_error", m.clone()),
            Failure::Reported => ErrorBody::new("failed", ""),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(1);
        }
    };
    let out = Out { json: cli.json };
    match rt.block_on(run(cli.cmd, &cli.server, out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !matches!(f, Failure::Reported) {
                if out.json {
                    out.value(&f.body());
                } else {
                    report(&f);
                }
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn report(f: &Failure) {
    match f {
        Failure::Client(ClientError::Api { body, .. }) => {
            eprintln!("error: {}", body.message);
            if let Some(vs) = &body.violations {
                output::violations(vs, &[]);
            }
            if let Some(r) = &body.report {
                output::report(r);
            }
            for u in body.unbound.iter().flatten() {
                let at = u.path.as_ref().map_or("document".to_string(), |p| p.to_string());
                eprintln!("  unbound in {at}: {}", u.names.join(", "));
            }
        }
        Failure::Client(e) => eprintln!("error: {e}"),
        Failure::Usage(m) => eprintln!("usage error: {m}"),
        Failure::Local(m) => eprintln!("error: {m}"),
        Failure::Reported => {}
    }
}

fn client(server: &str) -> Result<Client, Failure> {
    Ok(Client::new(server)?)
}

async fn run(cmd: Cmd, server: &str, out: Out) -> CmdResult {
    match cmd {
        Cmd::Init { dir, fixtures: with } => init(&dir, with, out),
        Cmd::Serve { store, addr } => serve(store, &addr).await,
        Cmd::Generic(g) => generic(g, &client(server)?, out).await,
        Cmd::Draft(d) => draft(d, &client(server)?, out).await,
        Cmd::Render { id, markup } => {
            let fmt = if markup { RenderFormat::Markup } else { RenderFormat::Text };
            let r = client(server)?.render(&id, fmt).await?;
            out.emit(&r, || match &r {
                Rendered::Text(d) => say_raw!("{}", d.text),
                Rendered::Markup { markup } => say!("{markup}"),
            });
            Ok(())
        }
        Cmd::Query(q) => {
            let filter = QueryFilter::from_params(q.params()).map_err(|e| Failure::Usage(e.to_string()))?;
            let hits = client(server)?.query(&filter).await?;
            out.emit(&hits, || output::summaries(&hits));
            Ok(())
        }
        Cmd::Expand { id } => {
            let r = client(server)?.render(&id, RenderFormat::Text).await?;
            out.emit(&r, || {
                if let Rendered::Text(d) = &r {
                    say_raw!("{}", d.text);
                }
            });
            Ok(())
        }
        Cmd::Fsck => {
            let r = client(server)?.fsck().await?;
            out.emit(&r, || output::findings(&r));
            if r.is_clean() {
                Ok(())
            } else {
                Err(Failure::Reported)
            }
        }
    }
}

fn init(dir: &std::path::Path, with_fixtures: bool, out: Out) -> CmdResult {
    let store = Store::open(dir).map_err(|e| Failure::Local(e.to_string()))?;
    let installed = if with_fixtures {
        fixtures::install(&store).map_err(|e| Failure::Local(e.to_string()))?
    } else {
        Vec::new()
    };
    #[derive(Serialize)]
    struct Init<'a> {
        store: String,
        installed: &'a [String],
    }
    let body = Init {
        store: dir.display().to_string(),
        installed: &installed,
    };
    out.emit(&body, || {
        say!("store ready at {}", body.store);
        for i in &installed {
            say!("  installed {i}");
        }
    });
    Ok(())
}

async fn serve(store: PathBuf, addr: &str) -> CmdResult {
    let engine = Engine::open(&store).map_err(|e| Failure::Local(e.to_string()))?;
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Failure::Local(format!("cannot bind {addr}: {e}")))?;
    let local = listener.local_addr().map_err(|e| Failure::Local(e.to_string()))?;
    say!("listening on http://{local}");
    eprintln!("store: {}", store.display());
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    draftsman_server::serve(listener, Arc::new(engine), shutdown)
        .await
        .map_err(|e| Failure::Local(e.to_string()))
}

fn read_generic(file: &std::path::Path) -> Result<GenericDocument, Failure> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::Local(format!("{}: {e}", file.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Local(format!("{}: not a generic document: {e}", file.display())))
}

async fn generic(cmd: GenericCmd, c: &Client, out: Out) -> CmdResult {
    match cmd {
        GenericCmd::List => {
            let list = c.list_generics().await?;
            out.emit(&list, || {
                for g in &list {
                    say!("{}  ({}, {} parts)", g.doc_type, g.category, g.parts);
                }
            });
        }
        GenericCmd::Show { doc_type } => {
            let g = c.get_generic(&doc_type).await?;
            out.emit(&g, || output::generic(&g));
        }
        GenericCmd::Import { file } => {
            let g = read_generic(&file)?;
            let r = c.import_generic(&g).await?;
            out.emit(&r, || {
                say!("imported {}", g.doc_type);
                output::report(&r);
            });
        }
        GenericCmd::Validate { file } => {
            let g = read_generic(&file)?;
            let r = c.validate_generic(&g).await?;
            out.emit(&r, || {
                if r.errors.is_empty() {
                    say!("OK");
                }
                output::report(&r);
            });
            if !r.errors.is_empty() {
                return Err(Failure::Reported);
            }
        }
    }
    Ok(())
}

async fn draft(cmd: DraftCmd, c: &Client, out: Out) -> CmdResult {
    match cmd {
        DraftCmd::New { doc_type, prefix } => {
            let s = c.start_session(&doc_type, prefix.as_deref()).await?;
            out.emit(&s, || {
                say!("session {}", s.session_id);
                say!("draft {} ({})", s.draft.id, s.doc_type);
            });
        }
        DraftCmd::Resume { session } => {
            let s = c.get_session(&session).await?;
            out.emit(&s, || output::session(&s));
        }
        DraftCmd::Edit { session, op } => {
            let edit = op.into_edit().map_err(Failure::Usage)?;
            let o = c.apply_edit(&session, &edit).await?;
            out.emit(&o, || {
                say!("ok (stage {:?})", o.session.stage);
                output::violations(&o.check.violations, &o.check.remedies);
            });
        }
        DraftCmd::Check { session } => {
            let r = c.check(&session).await?;
            out.emit(&r, || {
                if r.violations.is_empty() {
                    say!("no violations");
                }
                output::violations(&r.violations, &r.remedies);
            });
            if !r.violations.is_empty() {
                return Err(Failure::Reported);
            }
        }
        DraftCmd::Finalize { session } => {
            let inst = c.finalize(&session).await?;
            out.emit(&inst, || say!("finalized {}: {}", inst.id, inst.display_name));
        }
    }
    Ok(())
}
