//! `mfkdf2`: vault lifecycle, derived modes, the timing oracle and the
//! security game harness from the command line.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 derivation failed,
//! 3 I/O error, lock contention or malformed vault.

mod file;
mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use mfkdf2::modes::mfchf2::{self, CredentialRecord};
use mfkdf2::modes::mfdpg2::{self, CharClass, CurveOrder, SitePasswordSpec};
use mfkdf2::oracle::http::{HttpOracleClient, OracleServer};
use mfkdf2::oracle::TimingOracle;
use mfkdf2::primitives::sha256;
use mfkdf2::{
    envelope, hints, DerivedKey, Env, KdfParams, PolicyState, PolicyTree, SetupOptions, SystemClock,
};
use mfkdf2_estmf::{run_suite, SuiteConfig, SUITES};

use crate::file::{write_atomic, Locked};
use crate::input::{FactorArg, WitnessArgs};

#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Derivation,
    Io(anyhow::Error),
    Malformed(String),
}

impl From<anyhow::Error> for Fail {
    fn from(e: anyhow::Error) -> Fail {
        Fail::Io(e)
    }
}

impl From<mfkdf2::Error> for Fail {
    fn from(e: mfkdf2::Error) -> Fail {
        use mfkdf2::Error as E;
        match e {
            E::DerivationFailed | E::WrongKey => Fail::Derivation,
            E::Malformed(m) => Fail::Malformed(m),
            E::UnsupportedKdf(id) => Fail::Malformed(format!("unsupported kdf algorithm id {id}")),
            other => Fail::Usage(other.to_string()),
        }
    }
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Usage(_) => 1,
            Fail::Derivation => 2,
            Fail::Io(_) | Fail::Malformed(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "mfkdf2", version, about = "Multi-factor key derivation vaults")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    #[command(subcommand)]
    Vault(VaultCmd),
    #[command(subcommand)]
    Envelope(EnvelopeCmd),
    #[command(subcommand)]
    Mfchf(MfchfCmd),
    #[command(subcommand)]
    Mfdpg(MfdpgCmd),
    #[command(subcommand)]
    Oracle(OracleCmd),
    #[command(subcommand)]
    Estmf(EstmfCmd),
}

#[derive(Args, Clone, Default)]
struct WitnessFlags {
    /// Password witnesses, filling password slots in slot order.
    #[arg(long = "password")]
    passwords: Vec<String>,
    /// HOTP codes, filling HOTP slots in slot order.
    #[arg(long)]
    hotp: Vec<String>,
    /// TOTP codes, filling TOTP slots in slot order.
    #[arg(long)]
    totp: Vec<String>,
    /// A witness for one named slot: ID=VALUE.
    #[arg(long = "witness", value_parser = input::parse_pair)]
    explicit: Vec<(String, String)>,
}

impl WitnessFlags {
    fn args(&self) -> WitnessArgs {
        WitnessArgs {
            passwords: self.passwords.clone(),
            hotp: self.hotp.clone(),
            totp: self.totp.clone(),
            explicit: self.explicit.clone(),
        }
    }
}

#[derive(Args, Clone)]
struct KdfFlags {
    #[arg(long, default_value_t = KdfParams::default().memory_kib)]
    memory_kib: u32,
    #[arg(long, default_value_t = KdfParams::default().time_cost)]
    time_cost: u32,
    #[arg(long, default_value_t = KdfParams::default().parallelism)]
    parallelism: u32,
}

impl KdfFlags {
    fn params(&self) -> KdfParams {
        KdfParams::new(self.memory_kib, self.time_cost, self.parallelism)
    }
}

#[derive(Args, Clone)]
struct SetupFlags {
    /// KIND[:ID][,key=value...]; kinds are password, hotp, totp, passkey, fuzzy.
    #[arg(long = "factor", required = true, value_parser = input::parse_factor)]
    factors: Vec<FactorArg>,
    /// Password values, assigned to password factors in order.
    #[arg(long = "password")]
    passwords: Vec<String>,
    /// Factors needed to derive; all of them when omitted.
    #[arg(long, conflicts_with = "policy")]
    threshold: Option<usize>,
    /// Policy over slot ids, e.g. "and(pw, or(otp, backup))".
    #[arg(long)]
    policy: Option<String>,
    /// Store a hint for a slot: ID=BITS.
    #[arg(long = "hint", value_parser = input::parse_pair)]
    hints: Vec<(String, String)>,
    #[command(flatten)]
    kdf: KdfFlags,
}

#[derive(Subcommand)]
enum VaultCmd {
    /// Create a vault and print the key fingerprint.
    Setup {
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        setup: SetupFlags,
        #[arg(long)]
        unsafe_print_key: bool,
    },
    /// Derive the key and rewrite the vault with the updated state.
    Derive {
        file: PathBuf,
        #[command(flatten)]
        w: WitnessFlags,
        #[arg(long)]
        unsafe_print_key: bool,
    },
    /// Replace the factor in one slot, keeping the key.
    Recover {
        file: PathBuf,
        #[arg(long)]
        slot: String,
        /// The new factor, in the same syntax as setup; its id is ignored.
        #[arg(long = "new-factor", value_parser = input::parse_factor)]
        new_factor: FactorArg,
        #[arg(long)]
        new_password: Option<String>,
        #[command(flatten)]
        w: WitnessFlags,
    },
    /// Raise the KDF cost; the key changes.
    UpgradeParams {
        file: PathBuf,
        #[command(flatten)]
        kdf: KdfFlags,
        #[command(flatten)]
        w: WitnessFlags,
        #[arg(long)]
        unsafe_print_key: bool,
    },
    /// Check one witness against the slot's stored hint.
    HintCheck {
        file: PathBuf,
        #[arg(long)]
        slot: String,
        #[command(flatten)]
        w: WitnessFlags,
    },
    /// Print the public state as JSON.
    Inspect { file: PathBuf },
}

#[derive(Subcommand)]
enum EnvelopeCmd {
    Seal {
        file: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(
            long,
            conflicts_with = "secret_hex",
            required_unless_present = "secret_hex"
        )]
        secret: Option<String>,
        #[arg(long)]
        secret_hex: Option<String>,
        #[command(flatten)]
        w: WitnessFlags,
    },
    Open {
        file: PathBuf,
        #[arg(long)]
        label: String,
        /// Print the secret as hex instead of text.
        #[arg(long)]
        hex: bool,
        #[command(flatten)]
        w: WitnessFlags,
    },
}

#[derive(Subcommand)]
enum MfchfCmd {
    /// Create a credential record.
    Enroll {
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        setup: SetupFlags,
    },
    /// Verify witnesses against a record; acceptance rewrites it.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        w: WitnessFlags,
    },
}

#[derive(Subcommand)]
enum MfdpgCmd {
    /// Site password from the vault key.
    Password {
        file: PathBuf,
        #[arg(long)]
        site: String,
        #[arg(long, default_value_t = 20)]
        length: usize,
        /// Classes that must appear: lower, upper, digit, symbol.
        #[arg(long, value_delimiter = ',')]
        require: Vec<String>,
        /// Restrict to these classes.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, default_value = "")]
        forbid: String,
        #[command(flatten)]
        w: WitnessFlags,
    },
    /// secp256r1 private scalar from the vault key.
    Passkey {
        file: PathBuf,
        #[command(flatten)]
        w: WitnessFlags,
        #[arg(long)]
        unsafe_print_key: bool,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Serve the timing oracle over HTTP until interrupted.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8700")]
        listen: String,
        /// 32-byte pepper as hex.
        #[arg(long)]
        pepper: String,
    },
}

#[derive(Subcommand)]
enum EstmfCmd {
    /// Run a game suite; exits 1 unless every record meets its expectation.
    Run {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = SuiteConfig::default().trials)]
        trials: u64,
        #[arg(long, default_value_t = SuiteConfig::default().queries)]
        queries: usize,
        #[arg(long, default_value_t = SuiteConfig::default().tamper_trials)]
        tamper_trials: u64,
        #[arg(long, default_value_t = SuiteConfig::default().share_samples)]
        share_samples: u64,
        /// 64 hex digits, or any text (hashed).
        #[arg(long, default_value = "estmf")]
        seed: String,
        /// Results file (JSON).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn env() -> Env {
    let mut env = Env::system();
    if let Ok(url) = std::env::var("MFKDF2_ORACLE_URL") {
        if !url.is_empty() {
            env.set_oracle(Some(Arc::new(HttpOracleClient::new(&url))));
        }
    }
    env
}

fn load(bytes: &[u8]) -> Result<PolicyState, Fail> {
    Ok(PolicyState::from_bytes(bytes)?)
}

fn show_key(key: &DerivedKey, unsafe_print: bool) {
    println!("fingerprint: {}", key.fingerprint());
    if unsafe_print {
        println!("key: {}", hex::encode(key.as_bytes()));
    }
}

fn show_slots(state: &PolicyState) {
    let slots: Vec<String> = state
        .slots
        .iter()
        .map(|s| format!("{} ({})", s.id, s.factor_type))
        .collect();
    println!("slots: {}", slots.join(", "));
}

fn setup_options(s: &SetupFlags) -> Result<SetupOptions, Fail> {
    let mut opts = SetupOptions::new(s.kdf.params());
    for (slot, bits) in &s.hints {
        let bits: u8 = bits
            .parse()
            .map_err(|_| Fail::Usage(format!("hint width {bits:?} is not a number")))?;
        opts = opts.with_hint(slot.clone(), bits);
    }
    Ok(opts)
}

fn setup(s: &SetupFlags, env: &mut Env) -> Result<(PolicyState, DerivedKey), Fail> {
    let mut notes = Vec::new();
    let specs = input::materials(&s.factors, &s.passwords, &mut notes)?;
    let opts = setup_options(s)?;
    let r = match (&s.policy, s.threshold) {
        (Some(p), _) => mfkdf2::setup_policy(&PolicyTree::parse(p)?, specs, &opts, env)?,
        (None, Some(t)) => mfkdf2::setup_threshold(t, specs, &opts, env)?,
        (None, None) => mfkdf2::setup_nn(specs, &opts, env)?,
    };
    for n in notes {
        println!("{n}");
    }
    Ok(r)
}

/// Lock, derive, hand the result to `then`, and write whatever state it returns.
fn with_derived<T>(
    path: &Path,
    w: &WitnessFlags,
    then: impl FnOnce(PolicyState, &DerivedKey, &mut Env) -> Result<(PolicyState, T), Fail>,
) -> Result<T, Fail> {
    let lock = Locked::acquire(path)?;
    let state = load(&lock.read()?)?;
    let mut env = env();
    let witnesses = input::witnesses(&state, &w.args())?;
    let (next, key) = mfkdf2::derive(&state, &witnesses, &mut env)?;
    let (next, out) = then(next, &key, &mut env)?;
    lock.write(&next.to_bytes())?;
    Ok(out)
}

fn classes(names: &[String]) -> Result<Vec<CharClass>, Fail> {
    names
        .iter()
        .map(|n| {
            CharClass::parse(n).ok_or_else(|| Fail::Usage(format!("unknown character class {n:?}")))
        })
        .collect()
}

fn run(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Vault(VaultCmd::Setup {
            output,
            setup: s,
            unsafe_print_key,
        }) => {
            let _lock = Locked::acquire(&output)?;
            let (state, key) = setup(&s, &mut env())?;
            write_atomic(&output, &state.to_bytes())?;
            show_slots(&state);
            show_key(&key, unsafe_print_key);
        }
        Cmd::Vault(VaultCmd::Derive {
            file,
            w,
            unsafe_print_key,
        }) => {
            let key = with_derived(&file, &w, |next, key, _| Ok((next, key.clone())))?;
            show_key(&key, unsafe_print_key);
        }
        Cmd::Vault(VaultCmd::Recover {
            file,
            slot,
            new_factor,
            new_password,
            w,
        }) => {
            let lock = Locked::acquire(&file)?;
            let state = load(&lock.read()?)?;
            let mut env = env();
            let witnesses = input::witnesses(&state, &w.args())?;
            let passwords: Vec<String> = new_password.into_iter().collect();
            let mut notes = Vec::new();
            let spec = input::materials(
                &[FactorArg {
                    id: slot.clone(),
                    ..new_factor
                }],
                &passwords,
                &mut notes,
            )?
            .remove(0);
            let next = mfkdf2::recover(&state, &witnesses, &slot, spec.material, &mut env)?;
            lock.write(&next.to_bytes())?;
            for n in notes {
                println!("{n}");
            }
            println!("replaced slot {slot}");
        }
        Cmd::Vault(VaultCmd::UpgradeParams {
            file,
            kdf,
            w,
            unsafe_print_key,
        }) => {
            let lock = Locked::acquire(&file)?;
            let state = load(&lock.read()?)?;
            let mut env = env();
            let witnesses = input::witnesses(&state, &w.args())?;
            let (next, key) = mfkdf2::upgrade_params(&state, &witnesses, kdf.params(), &mut env)?;
            lock.write(&next.to_bytes())?;
            show_key(&key, unsafe_print_key);
        }
        Cmd::Vault(VaultCmd::HintCheck { file, slot, w }) => {
            let state = load(&std::fs::read(&file).map_err(|e| Fail::Io(e.into()))?)?;
            let witnesses = input::witnesses(&state, &w.args())?;
            let witness = witnesses
                .get(&slot)
                .ok_or_else(|| Fail::Usage(format!("no witness given for slot {slot:?}")))?;
            let verdict = hints::check_hint_witness(&state, &slot, witness, &mut env())?;
            println!(
                "{}",
                serde_json::to_value(verdict)
                    .expect("verdict serializes")
                    .as_str()
                    .unwrap_or_default()
            );
        }
        Cmd::Vault(VaultCmd::Inspect { file }) => {
            let state = load(&std::fs::read(&file).map_err(|e| Fail::Io(e.into()))?)?;
            println!("{}", state.debug_json());
        }
        Cmd::Envelope(EnvelopeCmd::Seal {
            file,
            label,
            secret,
            secret_hex,
            w,
        }) => {
            let secret = match (secret, secret_hex) {
                (Some(s), _) => s.into_bytes(),
                (None, Some(h)) => {
                    hex::decode(h).map_err(|_| Fail::Usage("--secret-hex must be hex".into()))?
                }
                (None, None) => unreachable!("clap requires one"),
            };
            with_derived(&file, &w, |next, key, env| {
                Ok((envelope::seal(&next, key, &label, &secret, env)?, ()))
            })?;
            println!("sealed {label}");
        }
        Cmd::Envelope(EnvelopeCmd::Open {
            file,
            label,
            hex,
            w,
        }) => {
            let secret = with_derived(&file, &w, |next, key, _| {
                let s = envelope::open(&next, key, &label)?;
                Ok((next, s))
            })?;
            if hex {
                println!("{}", hex::encode(&secret));
            } else {
                println!("{}", String::from_utf8_lossy(&secret));
            }
        }
        Cmd::Mfchf(MfchfCmd::Enroll { output, setup: s }) => {
            let _lock = Locked::acquire(&output)?;
            let (state, key) = setup(&s, &mut env())?;
            let record = CredentialRecord::new(state, &key);
            write_atomic(&output, &record.to_bytes())?;
            show_slots(&record.state);
            println!("enrolled");
        }
        Cmd::Mfchf(MfchfCmd::Verify { file, w }) => {
            let lock = Locked::acquire(&file)?;
            let record = CredentialRecord::from_bytes(&lock.read()?)?;
            let witnesses = input::witnesses(&record.state, &w.args())?;
            match mfchf2::verify(&record, &witnesses, &mut env())? {
                mfchf2::Verdict::Accept(next) => {
                    lock.write(&next.to_bytes())?;
                    println!("accepted");
                }
                mfchf2::Verdict::Reject => {
                    println!("rejected");
                    return Err(Fail::Derivation);
                }
            }
        }
        Cmd::Mfdpg(MfdpgCmd::Password {
            file,
            site,
            length,
            require,
            only,
            forbid,
            w,
        }) => {
            let mut spec = SitePasswordSpec::new(site, length);
            if !only.is_empty() {
                spec = spec.only(&classes(&only)?);
            }
            for c in classes(&require)? {
                spec = spec.require(c);
            }
            spec = spec.forbid(&forbid);
            let pw = with_derived(&file, &w, |next, key, _| {
                Ok((next, mfdpg2::password(key, &spec)?))
            })?;
            println!("{pw}");
        }
        Cmd::Mfdpg(MfdpgCmd::Passkey {
            file,
            w,
            unsafe_print_key,
        }) => {
            let scalar = with_derived(&file, &w, |next, key, _| {
                Ok((next, mfdpg2::passkey(key, &CurveOrder::secp256r1())?))
            })?;
            let bytes = scalar.to_bytes_be();
            println!("fingerprint: {}", hex::encode(&sha256(&bytes)[..8]));
            if unsafe_print_key {
                println!("scalar: {}", hex::encode(bytes));
            }
        }
        Cmd::Oracle(OracleCmd::Serve { listen, pepper }) => {
            let pepper: [u8; 32] = hex::decode(&pepper)
                .ok()
                .and_then(|b| b.try_into().ok())
                .ok_or_else(|| Fail::Usage("--pepper must be 32 bytes of hex".into()))?;
            let oracle = Arc::new(TimingOracle::new(pepper, Arc::new(SystemClock)));
            let server = OracleServer::start(oracle, &listen).map_err(|e| Fail::Io(e.into()))?;
            println!("listening on {}", server.url());
            server.join();
        }
        Cmd::Estmf(EstmfCmd::Run {
            suite,
            trials,
            queries,
            tamper_trials,
            share_samples,
            seed,
            output,
        }) => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Fail::Usage(format!(
                    "unknown suite {suite:?}; expected one of {}",
                    SUITES.join(", ")
                )));
            }
            let seed = match hex::decode(&seed)
                .ok()
                .and_then(|b| <[u8; 32]>::try_from(b).ok())
            {
                Some(s) => s,
                None => sha256(seed.as_bytes()),
            };
            let cfg = SuiteConfig {
                trials,
                seed,
                queries,
                tamper_trials,
                share_samples,
                ..Default::default()
            };
            let report = run_suite(&suite, &cfg).map_err(|e| Fail::Usage(e.to_string()))?;
            print!("{}", report.summary());
            if let Some(out) = output {
                write_atomic(&out, report.to_json().as_bytes())?;
            }
            if !report.all_expected() {
                return Err(Fail::Usage(
                    "some games did not meet their expectation".into(),
                ));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Fail::Derivation => eprintln!("derivation failed"),
                Fail::Usage(m) => eprintln!("error: {m}"),
                Fail::Io(e) => eprintln!("error: {e:#}"),
                Fail::Malformed(m) => eprintln!("error: malformed vault: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
