//! The `qrs` command line.
//!
//! Every subcommand computes into memory and writes its report once at the
//! end. Exit codes: 0 success, 1 a verification check failed, 2 bad input.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::arith::{
    count_small_divisors, divisor_tail_sum, divisors, enumerate_squares, is_prime, make_modulus,
    odd_primorial, reduce_even, squares_by_crt, SquareFreeModulus,
};
use crate::correlations::{
    correlate, correlation_circle, correlation_definition, correlation_formula, main_term,
    CorrelationOptions, CorrelationRecord, Method,
};
use crate::counting::{scan_a_bound, verify_sum_lemma, PrimeCounter};
use crate::error::{Error, Result};
use crate::lattices::{format_rational, ConvexRegion, DEFAULT_BUDGET};
use crate::partitions::{delta, PartitionPoset};
use crate::spacings::{
    davenport_histogram, exponential_fit, gnuplot_script, joint_sandwich_g, sandwich_g,
    write_cdf_csv, write_davenport_csv, CirclePointSet, SpacingReport,
};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Def,
    Formula,
    Circle,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Def => vec![Method::DefinitionHSum],
            MethodArg::Formula => vec![Method::LatticeFormula],
            MethodArg::Circle => vec![Method::CircleTuples],
            MethodArg::All => vec![Method::DefinitionHSum, Method::LatticeFormula, Method::CircleTuples],
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qrs", version, about = "Spacing statistics and correlations of squares modulo square-free q")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write the report here instead of stdout (gnuplot also writes `<path>.gp`).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads; 0 means all cores.
    #[arg(long, global = true, env = "QRS_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Cap on lattice points visited by one enumeration.
    #[arg(long, global = true, env = "QRS_BUDGET", default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    /// File of `key = value` lines supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModulusArg {
    /// Square-free modulus: an integer or `primorial-odd:k` (product of the first k odd primes).
    #[arg(long = "q", visible_alias = "modulus", value_parser = parse_modulus)]
    pub q: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List the squares mod q.
    Residues {
        #[command(flatten)]
        modulus: ModulusArg,
        /// Only report the count.
        #[arg(long)]
        count_only: bool,
    },
    /// r-level correlation R_r(C, q) by one or all methods.
    Correlate {
        #[command(flatten)]
        modulus: ModulusArg,
        #[arg(long, default_value_t = 2)]
        r: usize,
        /// `box:a,b;...`, `simplex:t,k` or `prod:t1,i;t2,j`.
        #[arg(long)]
        region: String,
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Keep partition tuples the wall pruning would skip.
        #[arg(long)]
        no_prune: bool,
        /// Report runtime_ms as 0 (for reproducible output).
        #[arg(long)]
        no_timing: bool,
    },
    /// Normalized gap statistics of the squares mod q against the exponential law.
    Spacings {
        #[command(flatten)]
        modulus: ModulusArg,
    },
    /// Integer gaps between squares mod a prime p against 2^-h.
    Davenport {
        #[arg(long)]
        p: u64,
        /// Largest gap length listed (0 lists all).
        #[arg(long, default_value_t = 0)]
        max_h: u64,
    },
    /// Run the exact-identity suite and print a pass/fail matrix.
    Verify {
        #[arg(long, default_value_t = 13)]
        max_prime: u64,
        #[arg(long, default_value_t = 4)]
        max_r: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pair-correlation and spacing convergence over a list of moduli.
    Sweep {
        /// Comma-separated moduli; `primorial-odd:a..b` expands to a range.
        #[arg(long, value_parser = parse_moduli)]
        moduli: ModuliList,
        #[arg(long, default_value = "box:1,2")]
        region: String,
    },
    /// Small-divisor diagnostics: #{d | q : d < s^alpha} and sum_{d > s} d^-alpha.
    Divisors {
        #[command(flatten)]
        modulus: ModulusArg,
        #[arg(long, default_value = "1", value_parser = parse_alpha)]
        alpha: Ratio<u32>,
        /// Also list every divisor.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuliList(pub Vec<u64>);

fn parse_modulus(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    if let Some(k) = s.strip_prefix("primorial-odd:") {
        let k: usize = k.parse().map_err(|_| format!("bad primorial index `{k}`"))?;
        return odd_primorial(k).map_err(|e| e.to_string());
    }
    s.parse().map_err(|_| format!("`{s}` is not a modulus"))
}

fn parse_moduli(s: &str) -> std::result::Result<ModuliList, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.strip_prefix("primorial-odd:").and_then(|r| r.split_once("..")) {
            Some((a, b)) => {
                let a: usize = a.parse().map_err(|_| format!("bad range start `{a}`"))?;
                let b: usize = b.parse().map_err(|_| format!("bad range end `{b}`"))?;
                for k in a..=b {
                    out.push(odd_primorial(k).map_err(|e| e.to_string())?);
                }
            }
            None => out.push(parse_modulus(part)?),
        }
    }
    if out.is_empty() {
        return Err("empty modulus list".into());
    }
    Ok(ModuliList(out))
}

fn parse_alpha(s: &str) -> std::result::Result<Ratio<u32>, String> {
    let bad = || format!("`{s}` is not a positive rational");
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
        None => (s.trim().parse().map_err(|_| bad())?, 1),
    };
    if n == 0 || d == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(n, d))
}

/// Reads `key = value` lines (`#` comments) into `--key value` arguments.
pub fn config_args(text: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("config line {}: expected key = value", no + 1)))?;
        let (k, v) = (k.trim().replace('_', "-"), v.trim());
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices config-file arguments in front of the command-line flags so the
/// latter win.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let pos = args.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args
            .get(pos + 1)
            .cloned()
            .ok_or_else(|| Error::Invalid("--config needs a path".into()))?,
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Invalid(format!("cannot read {path}: {e}")))?;
    let extra = config_args(&text)?;
    // insert right after the subcommand name
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-') && COMMANDS.contains(&a.as_str()))
        .map(|i| i + 2)
        .unwrap_or(args.len());
    let mut out = args[..sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[sub..]);
    Ok(out)
}

const COMMANDS: [&str; 7] = ["residues", "correlate", "spacings", "davenport", "verify", "sweep", "divisors"];

/// A finished report and whether every check in it passed.
pub struct Report {
    pub body: String,
    pub gnuplot: Option<String>,
    pub ok: bool,
}

impl Report {
    fn ok(body: String) -> Self {
        Report {
            body,
            gnuplot: None,
            ok: true,
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn rational_json(x: &BigRational) -> Value {
    json!(format_rational(x))
}

fn region_arg(s: &str) -> Result<ConvexRegion> {
    s.parse()
}

fn cmd_residues(q: u64, count_only: bool, format: Format) -> Result<Report> {
    let m = make_modulus(q)?;
    let set = enumerate_squares(&m)?;
    let body = match format {
        Format::Json => {
            let mut v = json!({"schema": SCHEMA, "q": q, "n": set.len()});
            if !count_only {
                v["residues"] = json!(set.residues());
            }
            to_json(&v)
        }
        _ if count_only => format!("q,n\n{q},{}\n", set.len()),
        _ => {
            let mut s = String::from("residue,fraction\n");
            for &x in set.residues() {
                writeln!(s, "{x},{}", x as f64 / q as f64).unwrap();
            }
            s
        }
    };
    Ok(Report::ok(body))
}

fn cmd_correlate(
    q: u64,
    r: usize,
    region: &str,
    method: MethodArg,
    opts: &CorrelationOptions,
    timing: bool,
    format: Format,
) -> Result<Report> {
    let c = region_arg(region)?;
    let mut records = Vec::new();
    for m in method.methods() {
        let start = Instant::now();
        let res = correlate(q, r, &c, m, opts)?;
        records.push(CorrelationRecord::new(&res, timing.then_some(start)));
    }
    let agree = records.windows(2).all(|w| w[0].value == w[1].value);
    let body = match format {
        Format::Json if records.len() == 1 => to_json(&records[0]),
        Format::Json => to_json(&records),
        _ => {
            let mut s = String::from("q,r,region,method,value,value_float,volume,deviation,runtime_ms\n");
            for rec in &records {
                writeln!(
                    s,
                    "{},{},\"{}\",{},{},{},{}/{},{},{}",
                    rec.q,
                    rec.r,
                    rec.region,
                    rec.method.as_str(),
                    rec.value,
                    rec.value_float,
                    rec.vol_num,
                    rec.vol_den,
                    rec.deviation_float,
                    rec.runtime_ms
                )
                .unwrap();
            }
            s
        }
    };
    Ok(Report {
        body,
        gnuplot: None,
        ok: agree,
    })
}

fn spacing_json(q: u64, m: &SquareFreeModulus, rep: &SpacingReport) -> Value {
    json!({
        "schema": SCHEMA,
        "q": q,
        "n": rep.n,
        "s": rational_json(m.mean_spacing()),
        "ks_exponential": rep.ks_exponential,
        "ks_argmax": rep.ks_argmax,
        "joint_ks": rep.joint_ks,
        "warning": rep.warning,
        "cdf": rep.cdf,
    })
}

fn cmd_spacings(q: u64, format: Format) -> Result<Report> {
    let m = make_modulus(q)?;
    let set = enumerate_squares(&m)?;
    let rep = exponential_fit(&CirclePointSet::from_residues(&set))?;
    let mut report = Report::ok(String::new());
    match format {
        Format::Json => report.body = to_json(&spacing_json(q, &m, &rep)),
        Format::Csv | Format::Gnuplot => {
            let mut buf = Vec::new();
            if format == Format::Gnuplot {
                writeln!(
                    report.body,
                    "# q={q} n={} ks_exponential={:.6} joint_ks={:.6}",
                    rep.n, rep.ks_exponential, rep.joint_ks
                )
                .unwrap();
            }
            write_cdf_csv(&rep, &mut buf).unwrap();
            report.body.push_str(&String::from_utf8(buf).unwrap());
        }
    }
    if let Some(w) = &rep.warning {
        eprintln!("warning: {w}");
    }
    Ok(report)
}

fn cmd_davenport(p: u64, max_h: u64, format: Format) -> Result<Report> {
    let mut hist = davenport_histogram(p)?;
    if max_h > 0 {
        hist.rows.retain(|r| r.h <= max_h);
    }
    let mut report = Report::ok(String::new());
    match format {
        Format::Json => {
            report.body = to_json(&json!({"schema": SCHEMA, "p": hist.p, "n": hist.n, "rows": hist.rows}));
        }
        _ => {
            let mut buf = Vec::new();
            write_davenport_csv(&hist, &mut buf).unwrap();
            report.body = String::from_utf8(buf).unwrap();
        }
    }
    Ok(report)
}

/// One row of the verification matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub cases: u64,
    pub failures: u64,
    pub detail: String,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Tally {
    row: CheckRow,
}

impl Tally {
    fn new(check: &str) -> Self {
        Tally {
            row: CheckRow {
                check: check.into(),
                cases: 0,
                failures: 0,
                detail: String::new(),
            },
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.row.cases += 1;
        if !ok {
            self.row.failures += 1;
            if self.row.detail.is_empty() {
                self.row.detail = what();
            }
        }
    }

    fn error(&mut self, e: Error) {
        self.record(false, || e.to_string());
    }

    fn done(self) -> CheckRow {
        self.row
    }
}

fn primes_up_to(max_prime: u64) -> Vec<u64> {
    (3..=max_prime).filter(|&p| is_prime(p)).collect()
}

/// Every `h` in `(Z/p)^dim`, in lexicographic order.
fn all_h(p: u64, dim: usize) -> impl Iterator<Item = Vec<i64>> {
    let total = p.pow(dim as u32);
    (0..total).map(move |mut i| {
        let mut h = vec![0i64; dim];
        for slot in h.iter_mut().rev() {
            *slot = (i % p) as i64;
            i /= p;
        }
        h
    })
}

/// Per-prime identities: the Delta decomposition, the complete sum of
/// `a Delta`, the total chain count, and the bound on `a`.
pub fn verify_prime_identities(max_prime: u64, max_r: usize) -> Vec<CheckRow> {
    let mut decomp = Tally::new("delta_decomposition");
    let mut lemma = Tally::new("sum_a_delta_closed_form");
    let mut total = Tally::new("sum_chain_counts");
    let mut bound = Tally::new("a_bound");
    let mut worst = 0.0f64;
    for r in 2..=max_r {
        let poset = match PartitionPoset::new(r) {
            Ok(p) => p,
            Err(e) => {
                decomp.error(e);
                continue;
            }
        };
        for p in primes_up_to(max_prime) {
            for h in all_h(p, r - 1) {
                let lhs = poset.delta_decomposition(&h, p);
                let rhs = delta(&h, p, r);
                decomp.record(matches!((&lhs, &rhs), (Ok(a), Ok(b)) if *a == *b as i64), || {
                    format!("p={p} r={r} h={h:?}: {lhs:?} vs {rhs:?}")
                });
            }
            match verify_sum_lemma(p, r) {
                Ok(c) => lemma.record(c.holds(), || format!("p={p} r={r}: {} vs {}", c.direct, c.closed_form)),
                Err(e) => lemma.error(e),
            }
            match PrimeCounter::new(p, r) {
                Ok(counter) => {
                    let sum: BigUint = counter.all_records().iter().map(|rec| BigUint::from(rec.n_solutions)).sum();
                    let expect = BigUint::from((p + 1) / 2).pow(r as u32);
                    total.record(sum == expect, || format!("p={p} r={r}: {sum} vs {expect}"));
                }
                Err(e) => total.error(e),
            }
            match scan_a_bound(p, r) {
                Ok(scan) => {
                    worst = worst.max(scan.max_ratio);
                    bound.record(scan.violations.is_empty(), || format!("p={p} r={r}: {:?}", scan.violations.first()));
                }
                Err(e) => bound.error(e),
            }
        }
    }
    if bound.row.detail.is_empty() {
        bound.row.detail = format!("max |a|/sqrt(p) = {worst:.4}");
    }
    vec![decomp.done(), lemma.done(), total.done(), bound.done()]
}

/// Sieve against CRT reconstruction on sampled square-free moduli.
pub fn verify_residue_sets(rng: &mut ChaCha8Rng, samples: usize) -> CheckRow {
    let mut t = Tally::new("sieve_vs_crt");
    let mut tried = 0;
    while tried < samples {
        let q = rng.gen_range(1..100_000u64);
        let Ok(m) = make_modulus(q) else { continue };
        tried += 1;
        match (enumerate_squares(&m), squares_by_crt(&m)) {
            (Ok(a), Ok(b)) => t.record(a == b && a.len() as u64 == m.n_residues(), || format!("q={q}")),
            (Err(e), _) | (_, Err(e)) => t.error(e),
        }
    }
    t.done()
}

/// Moduli, tuple lengths and boxes for the three-way correlation check.
pub fn correlation_grid() -> Vec<(u64, usize, &'static str)> {
    let mut grid = Vec::new();
    for q in [15, 21, 105, 1155] {
        grid.push((q, 2, "box:1,2"));
        grid.push((q, 2, "box:1/2,3"));
        grid.push((q, 3, "box:1,2;1,2"));
        grid.push((q, 3, "box:2,3;-3/2,-1"));
    }
    grid.push((15, 4, "box:1,2;1,2;1,2"));
    grid
}

pub fn verify_correlations(opts: &CorrelationOptions) -> Vec<CheckRow> {
    let mut three = Tally::new("three_way_agreement");
    let mut prune = Tally::new("pruning_preserves_value");
    let mut main = Tally::new("main_term_equals_volume");
    let mut even = Tally::new("even_reduction");
    let unpruned = CorrelationOptions { prune: false, ..*opts };
    for (q, r, c) in correlation_grid() {
        let region: ConvexRegion = c.parse().expect("grid regions parse");
        let run = || -> Result<(BigRational, BigRational, BigRational, BigRational, BigRational)> {
            let m = make_modulus(q)?;
            let d = correlation_definition(&m, r, &region, opts)?.value;
            let f = correlation_formula(&m, r, &region, opts)?.value;
            let f0 = correlation_formula(&m, r, &region, &unpruned)?.value;
            let circ = correlation_circle(&enumerate_squares(&m)?, r, &region)?.value;
            Ok((d, f, f0, circ, main_term(&m, r, &region)?))
        };
        match run() {
            Ok((d, f, f0, circ, mt)) => {
                three.record(d == f && f == circ, || format!("q={q} r={r} {c}: {d} / {f} / {circ}"));
                prune.record(f == f0, || format!("q={q} r={r} {c}: {f} vs {f0}"));
                main.record(mt == region.volume(), || format!("q={q} r={r} {c}: {mt}"));
            }
            Err(e) => three.error(e),
        }
    }
    for q in [15u64, 105] {
        for (r, c) in [(2, "box:1,2"), (3, "box:1,2;1,2")] {
            let region: ConvexRegion = c.parse().expect("grid regions parse");
            let run = || -> Result<(BigRational, BigRational)> {
                let odd = correlation_definition(&make_modulus(q)?, r, &region, opts)?.value;
                // the even side counts actual tuples of squares mod 2q
                let two = make_modulus(2 * q)?;
                let even = correlation_circle(&enumerate_squares(&two)?, r, &region)?.value;
                Ok((odd, even))
            };
            match run() {
                Ok((a, b)) => even.record(a == b, || format!("q'={q} r={r}: {a} vs {b}")),
                Err(e) => even.error(e),
            }
            match reduce_even(2 * q) {
                Ok(red) => even.record(red.holds(), || format!("residue certificate for {}", 2 * q)),
                Err(e) => even.error(e),
            }
        }
    }
    vec![three.done(), prune.done(), main.done(), even.done()]
}

/// A random set of `n` distinct points on a grid of `scale` slots.
pub fn random_point_set(rng: &mut ChaCha8Rng, n: usize, scale: u64) -> CirclePointSet {
    let mut pts = std::collections::BTreeSet::new();
    while pts.len() < n {
        pts.insert(rng.gen_range(0..scale));
    }
    CirclePointSet::new(scale, pts.into_iter().collect()).expect("sorted distinct points")
}

pub fn verify_sandwiches(rng: &mut ChaCha8Rng, trials: usize) -> Vec<CheckRow> {
    let mut pair = Tally::new("pair_sandwich");
    let mut joint = Tally::new("joint_sandwich");
    let depths = [1, 2, 3];
    let mut sets: Vec<CirclePointSet> = (0..trials)
        .map(|_| {
            let n = rng.gen_range(2..=200);
            random_point_set(rng, n, 10_000)
        })
        .collect();
    for q in [15, 105] {
        sets.push(CirclePointSet::from_residues(
            &enumerate_squares(&make_modulus(q).expect("square-free")).expect("small sieve"),
        ));
    }
    for s in &sets {
        let scale = s.scale();
        let x = Ratio::new(rng.gen_range(1..scale / 2), scale);
        match sandwich_g(s, &x, &depths) {
            Ok(sw) => pair.record(sw.identity_holds() && sw.brackets_hold(), || format!("N={} x={x}: {sw:?}", s.len())),
            Err(e) => pair.error(e),
        }
        let x = Ratio::new(rng.gen_range(1..scale / 4), scale);
        let y = Ratio::new(rng.gen_range(1..scale / 4), scale);
        match joint_sandwich_g(s, &x, &y, &depths) {
            Ok(sw) => joint.record(sw.identity_holds() && sw.brackets_hold(), || {
                format!("N={} x={x} y={y}: {sw:?}", s.len())
            }),
            Err(e) => joint.error(e),
        }
    }
    vec![pair.done(), joint.done()]
}

pub fn verify_all(max_prime: u64, max_r: usize, seed: u64, opts: &CorrelationOptions) -> Vec<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = verify_prime_identities(max_prime, max_r);
    rows.push(verify_residue_sets(&mut rng, 50));
    rows.extend(verify_correlations(opts));
    rows.extend(verify_sandwiches(&mut rng, 100));
    rows
}

fn cmd_verify(max_prime: u64, max_r: usize, seed: u64, opts: &CorrelationOptions, format: Format) -> Result<Report> {
    if max_prime < 3 {
        return Err(Error::Invalid("--max-prime must be at least 3".into()));
    }
    crate::partitions::check_r(max_r)?;
    let rows = verify_all(max_prime, max_r, seed, opts);
    let ok = rows.iter().all(CheckRow::passed);
    let body = match format {
        Format::Json => to_json(&json!({"schema": SCHEMA, "passed": ok, "checks": rows})),
        _ => {
            let mut s = String::from("check,cases,failures,status,detail\n");
            for r in &rows {
                let status = if r.passed() { "pass" } else { "FAIL" };
                writeln!(s, "{},{},{},{status},\"{}\"", r.check, r.cases, r.failures, r.detail.replace('"', "'"))
                    .unwrap();
            }
            s
        }
    };
    Ok(Report { body, gnuplot: None, ok })
}

/// One modulus in a convergence sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepLine {
    pub q: u64,
    pub omega: usize,
    pub n: u64,
    pub s: String,
    pub s_float: f64,
    pub r2: String,
    pub r2_float: f64,
    pub abs_dev: f64,
    pub sqrt_s_dev: f64,
    pub ks_exponential: f64,
    pub joint_ks: f64,
}

pub fn sweep(moduli: &[u64], region: &ConvexRegion, opts: &CorrelationOptions) -> Result<Vec<SweepLine>> {
    let rows = crate::correlations::pair_correlation_sweep(moduli, region, opts)?;
    rows.into_iter()
        .map(|row| {
            let m = make_modulus(row.q)?;
            let rep = exponential_fit(&CirclePointSet::from_residues(&enumerate_squares(&m)?))?;
            Ok(SweepLine {
                q: row.q,
                omega: row.omega,
                n: m.n_residues(),
                s: format_rational(&row.s),
                s_float: row.s.to_f64().unwrap_or(f64::NAN),
                r2: format_rational(&row.r2),
                r2_float: row.r2.to_f64().unwrap_or(f64::NAN),
                abs_dev: row.deviation,
                sqrt_s_dev: row.sqrt_s_deviation,
                ks_exponential: rep.ks_exponential,
                joint_ks: rep.joint_ks,
            })
        })
        .collect()
}

fn cmd_sweep(moduli: &[u64], region: &str, opts: &CorrelationOptions, format: Format) -> Result<Report> {
    let c = region_arg(region)?;
    let rows = sweep(moduli, &c, opts)?;
    let mut report = Report::ok(String::new());
    match format {
        Format::Json => report.body = to_json(&json!({"schema": SCHEMA, "region": c.to_string(), "rows": rows})),
        _ => {
            let s = &mut report.body;
            s.push_str("q,omega,n,s,r2,abs_dev,sqrt_s_dev,ks_exponential,joint_ks\n");
            for r in &rows {
                writeln!(
                    s,
                    "{},{},{},{:.6},{:.8},{:.8},{:.6},{:.6},{:.6}",
                    r.q, r.omega, r.n, r.s_float, r.r2_float, r.abs_dev, r.sqrt_s_dev, r.ks_exponential, r.joint_ks
                )
                .unwrap();
            }
            let bound = rows.iter().map(|r| r.sqrt_s_dev).fold(0.0, f64::max);
            writeln!(s, "# max sqrt(s)*|R2-vol| = {bound:.6}").unwrap();
        }
    }
    Ok(report)
}

fn cmd_divisors(q: u64, alpha: Ratio<u32>, list: bool, format: Format) -> Result<Report> {
    let m = make_modulus(q)?;
    let small = count_small_divisors(&m, alpha)?;
    let tail = divisor_tail_sum(&m, alpha)?;
    let divs = if list { Some(divisors(&m)?) } else { None };
    let body = match format {
        Format::Json => to_json(&json!({
            "schema": SCHEMA,
            "q": q,
            "s": rational_json(m.mean_spacing()),
            "alpha": alpha.to_string(),
            "small_divisors": small,
            "tail_sum": tail.exact.as_ref().map(format_rational),
            "tail_sum_float": tail.value,
            "ratio_to_bound": tail.ratio_to_bound,
            "divisors": divs,
        })),
        _ => {
            let mut s = String::from("q,s,alpha,small_divisors,tail_sum,tail_sum_float,ratio_to_bound\n");
            writeln!(
                s,
                "{q},{},{alpha},{small},{},{},{}",
                format_rational(m.mean_spacing()),
                tail.exact.as_ref().map(format_rational).unwrap_or_default(),
                tail.value,
                tail.ratio_to_bound
            )
            .unwrap();
            if let Some(d) = divs {
                s.push_str("divisor\n");
                for x in d {
                    writeln!(s, "{x}").unwrap();
                }
            }
            s
        }
    };
    Ok(Report::ok(body))
}

fn gnuplot_for(command: &Command, data: &str) -> String {
    match command {
        Command::Spacings { .. } => gnuplot_script(data, "Normalized gap CDF", (1, 2), "1-exp(-x)"),
        Command::Davenport { .. } => gnuplot_script(data, "Gaps between squares mod p", (1, 3), "2**(-x)"),
        Command::Sweep { .. } => gnuplot_script(data, "sqrt(s) |R2 - vol|", (4, 7), "0"),
        _ => gnuplot_script(data, "qrs", (1, 2), "0"),
    }
}

/// Runs a parsed command inside a pool of the requested size.
pub fn execute(cli: &Cli) -> Result<Report> {
    let g = &cli.global;
    if g.budget == 0 {
        return Err(Error::Invalid("--budget must be positive".into()));
    }
    let opts = CorrelationOptions {
        budget: g.budget,
        prune: true,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    let f = g.format;
    let mut report = pool.install(|| match &cli.command {
        Command::Residues { modulus, count_only } => cmd_residues(modulus.q, *count_only, f),
        Command::Correlate {
            modulus,
            r,
            region,
            method,
            no_prune,
            no_timing,
        } => {
            let opts = CorrelationOptions { prune: !no_prune, ..opts };
            cmd_correlate(modulus.q, *r, region, *method, &opts, !no_timing, f)
        }
        Command::Spacings { modulus } => cmd_spacings(modulus.q, f),
        Command::Davenport { p, max_h } => cmd_davenport(*p, *max_h, f),
        Command::Verify { max_prime, max_r, seed } => cmd_verify(*max_prime, *max_r, *seed, &opts, f),
        Command::Sweep { moduli, region } => cmd_sweep(&moduli.0, region, &opts, f),
        Command::Divisors { modulus, alpha, list } => cmd_divisors(modulus.q, *alpha, *list, f),
    })?;
    if f == Format::Gnuplot {
        let data = g
            .output
            .as_ref()
            .map_or("data.csv".to_string(), |p| p.display().to_string());
        report.gnuplot = Some(gnuplot_for(&cli.command, &data));
    } else {
        report.gnuplot = None;
    }
    Ok(report)
}

fn write_report(cli: &Cli, report: &Report) -> std::io::Result<()> {
    match &cli.global.output {
        Some(path) => {
            std::fs::write(path, &report.body)?;
            if let Some(gp) = &report.gnuplot {
                let mut script = path.clone().into_os_string();
                script.push(".gp");
                std::fs::write(script, gp)?;
            }
        }
        None => {
            print!("{}", report.body);
            if let Some(gp) = &report.gnuplot {
                for line in gp.lines() {
                    println!("# gnuplot: {line}");
                }
            }
        }
    }
    Ok(())
}

/// Entry point; returns the process exit code.
pub fn run_with(args: Vec<String>) -> i32 {
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            if let Err(e) = write_report(&cli, &report) {
                eprintln!("error: {e}");
                return 2;
            }
            if report.ok {
                0
            } else {
                eprintln!("verification failed");
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("qrs").chain(args.iter().copied())).unwrap()
    }

    fn body(args: &[&str]) -> Result<Report> {
        execute(&parse(args))
    }

    #[test]
    fn residues_json() {
        let r = body(&["residues", "--q", "15", "--format", "json"]).unwrap();
        let v: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v, json!({"schema": 1, "q": 15, "n": 6, "residues": [0, 1, 4, 6, 9, 10]}));
        let e = body(&["residues", "--q", "12"]).err().unwrap();
        assert_eq!(e.to_string(), "q is not square-free (4 | q)");
        let r = body(&["residues", "--modulus", "primorial-odd:3", "--format", "json", "--count-only"]).unwrap();
        assert!(r.body.contains("\"q\": 105"));
    }

    #[test]
    fn correlate_methods() {
        let r = body(&["correlate", "--q", "105", "--r", "2", "--region", "box:1,2", "--method", "all", "--format", "json"]).unwrap();
        assert!(r.ok);
        let v: Vec<Value> = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|x| x["value"] == v[0]["value"]));
        let r = body(&["correlate", "--q", "15", "--region", "box:1,2", "--method", "formula", "--format", "json"]).unwrap();
        let v: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v["value"], "2/3");
        assert_eq!(v["schema"], 1);
        let e = body(&["correlate", "--q", "15", "--r", "3", "--region", "box:-1,1;2,3"]).err().unwrap();
        assert!(e.to_string().contains("sigma_12"));
    }

    #[test]
    fn exit_codes() {
        let run = |a: &[&str]| run_with(std::iter::once("qrs").chain(a.iter().copied()).map(String::from).collect());
        assert_eq!(run(&["residues", "--q", "12"]), 2);
        assert_eq!(run(&["residues", "--q", "abc"]), 2);
        assert_eq!(run(&["nonsense"]), 2);
    }

    #[test]
    fn moduli_lists() {
        assert_eq!(parse_moduli("primorial-odd:1..3").unwrap(), ModuliList(vec![3, 15, 105]));
        assert_eq!(parse_moduli("15, 21,primorial-odd:2").unwrap(), ModuliList(vec![15, 21, 15]));
        assert!(parse_moduli("").is_err());
        assert_eq!(parse_alpha("1/2").unwrap(), Ratio::new(1, 2));
        assert!(parse_alpha("0").is_err());
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let extra = config_args("# defaults\nq = 21\nformat=json\ncount_only = true\n").unwrap();
        assert_eq!(extra, vec!["--q", "21", "--format", "json", "--count-only"]);
        let dir = std::env::temp_dir().join(format!("qrs-config-{}", std::process::id()));
        std::fs::write(&dir, "q = 21\nformat = json\n").unwrap();
        let args: Vec<String> = ["qrs", "residues", "--config", dir.to_str().unwrap(), "--q", "15"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let cli = Cli::try_parse_from(expand_config(args).unwrap()).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(cli.global.format, Format::Json);
        match cli.command {
            Command::Residues { modulus, .. } => assert_eq!(modulus.q, 15),
            _ => panic!(),
        }
    }

    #[test]
    fn verify_small_passes() {
        let opts = CorrelationOptions::default();
        let rows = verify_prime_identities(7, 3);
        assert!(rows.iter().all(CheckRow::passed), "{rows:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = verify_sandwiches(&mut rng, 10);
        assert!(rows.iter().all(CheckRow::passed), "{rows:?}");
        let _ = opts;
    }

    #[test]
    fn divisors_example() {
        let r = body(&["divisors", "--q", "15015", "--alpha", "1", "--format", "json"]).unwrap();
        let v: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v["small_divisors"], 6);
        let r = body(&["divisors", "--q", "15", "--format", "json"]).unwrap();
        let v: Value = serde_json::from_str(&r.body).unwrap();
        assert_eq!(v["tail_sum"], "3/5");
    }
}
