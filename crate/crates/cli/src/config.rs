//! Run configuration: a flat TOML document (keys may be grouped under
//! sections) merged with `--key value` command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use toml::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Qfi,
    WeakComm,
    KappaScan,
    Optimize,
    Tomography,
    SimulateCounts,
    ConjectureSearch,
    GateModel,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Qfi,
        Command::WeakComm,
        Command::KappaScan,
        Command::Optimize,
        Command::Tomography,
        Command::SimulateCounts,
        Command::ConjectureSearch,
        Command::GateModel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Qfi => "qfi",
            Command::WeakComm => "weak-comm",
            Command::KappaScan => "kappa-scan",
            Command::Optimize => "optimize",
            Command::Tomography => "tomography",
            Command::SimulateCounts => "simulate-counts",
            Command::ConjectureSearch => "conjecture-search",
            Command::GateModel => "gate-model",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float {
        min: f64,
        max: f64,
    },
    Int {
        min: i64,
        max: i64,
    },
    Bool,
    Choice(&'static [&'static str]),
    Path,
    /// List of scenario setting names.
    Settings,
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    commands: &'static [Command],
}

use Command::*;

const ANY: f64 = f64::INFINITY;
const SCENARIO: &[Command] = &[Qfi, WeakComm, KappaScan, Optimize];
const WITH_DETECTOR: &[Command] = &[KappaScan, Optimize, SimulateCounts];
const WITH_GATE: &[Command] = &[KappaScan, Optimize, SimulateCounts, GateModel];

const KEYS: &[KeySpec] = &[
    KeySpec {
        name: "family",
        kind: Kind::Choice(&["phase-dephasing", "two-phase"]),
        commands: SCENARIO,
    },
    KeySpec {
        name: "copies",
        kind: Kind::Int { min: 1, max: 2 },
        commands: &[Qfi],
    },
    KeySpec {
        name: "phi",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[Qfi, WeakComm, KappaScan, Optimize, Tomography],
    },
    KeySpec {
        name: "delta",
        kind: Kind::Float { min: 0.0, max: ANY },
        commands: &[Qfi, WeakComm, KappaScan, Optimize, Tomography],
    },
    KeySpec {
        name: "phi_y",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[Qfi, WeakComm, KappaScan, Optimize, ConjectureSearch],
    },
    KeySpec {
        name: "phi_z",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[Qfi, WeakComm, KappaScan, Optimize, ConjectureSearch],
    },
    KeySpec {
        name: "xi",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[Qfi, KappaScan, Optimize],
    },
    KeySpec {
        name: "xi1",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[Qfi, KappaScan, Optimize, Tomography],
    },
    KeySpec {
        name: "xi2",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[Qfi, KappaScan, Optimize, Tomography],
    },
    KeySpec {
        name: "measurement",
        kind: Kind::Choice(&["bell", "gate", "file", "product"]),
        commands: WITH_DETECTOR,
    },
    KeySpec {
        name: "povm",
        kind: Kind::Path,
        commands: WITH_DETECTOR,
    },
    KeySpec {
        name: "t_h",
        kind: Kind::Float { min: 0.0, max: 1.0 },
        commands: WITH_GATE,
    },
    KeySpec {
        name: "t_v",
        kind: Kind::Float { min: 0.0, max: 1.0 },
        commands: WITH_GATE,
    },
    KeySpec {
        name: "visibility",
        kind: Kind::Float { min: 0.0, max: 1.0 },
        commands: WITH_GATE,
    },
    KeySpec {
        name: "compensated",
        kind: Kind::Bool,
        commands: WITH_GATE,
    },
    KeySpec {
        name: "free",
        kind: Kind::Settings,
        commands: &[KappaScan, Optimize],
    },
    KeySpec {
        name: "budget",
        kind: Kind::Int {
            min: 1,
            max: 10_000_000,
        },
        commands: &[KappaScan, Optimize],
    },
    KeySpec {
        name: "scan",
        kind: Kind::Choice(&["delta", "phi", "phi_y", "phi_z"]),
        commands: &[KappaScan],
    },
    KeySpec {
        name: "grid_min",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[KappaScan],
    },
    KeySpec {
        name: "grid_max",
        kind: Kind::Float { min: -ANY, max: ANY },
        commands: &[KappaScan],
    },
    KeySpec {
        name: "grid_points",
        kind: Kind::Int { min: 1, max: 100_000 },
        commands: &[KappaScan],
    },
    KeySpec {
        name: "grid_spacing",
        kind: Kind::Choice(&["log", "linear"]),
        commands: &[KappaScan],
    },
    KeySpec {
        name: "xi_points",
        kind: Kind::Int { min: 8, max: 1_000_000 },
        commands: &[WeakComm],
    },
    KeySpec {
        name: "exposure",
        kind: Kind::Float { min: 1e-300, max: 1e15 },
        commands: &[SimulateCounts],
    },
    KeySpec {
        name: "counts",
        kind: Kind::Path,
        commands: &[Tomography],
    },
    KeySpec {
        name: "ideal",
        kind: Kind::Path,
        commands: &[Tomography],
    },
    KeySpec {
        name: "max_iters",
        kind: Kind::Int {
            min: 1,
            max: 100_000_000,
        },
        commands: &[Tomography],
    },
    KeySpec {
        name: "tol",
        kind: Kind::Float { min: 0.0, max: 1.0 },
        commands: &[Tomography],
    },
    KeySpec {
        name: "mc_runs",
        kind: Kind::Int { min: 0, max: 1_000_000 },
        commands: &[Tomography],
    },
    KeySpec {
        name: "trials",
        kind: Kind::Int {
            min: 1,
            max: 100_000_000,
        },
        commands: &[ConjectureSearch],
    },
    KeySpec {
        name: "budget_per_trial",
        kind: Kind::Int { min: 1, max: 1_000_000 },
        commands: &[ConjectureSearch],
    },
];

/// Keys handled by the runner itself rather than a command.
const RUN_KEYS: &[&str] = &["command", "seed", "out"];

/// Optional grouping tables; keys inside are flattened.
pub const SECTIONS: &[&str] = &["run", "scenario", "measurement", "gate", "scan", "tomography", "search"];

/// Required keys per command; the second list entry is a condition
/// `(key, value)` under which the key becomes required.
fn required(command: Command) -> Vec<(&'static str, Option<(&'static str, &'static str)>)> {
    match command {
        Tomography => vec![("counts", None)],
        KappaScan | Optimize | SimulateCounts => vec![("povm", Some(("measurement", "file")))],
        _ => vec![],
    }
}

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

fn schema(command: Command) -> String {
    let keys: Vec<&str> = KEYS
        .iter()
        .filter(|k| k.commands.contains(&command))
        .map(|k| k.name)
        .collect();
    let req: Vec<String> = required(command)
        .into_iter()
        .map(|(k, cond)| match cond {
            None => k.to_string(),
            Some((ck, cv)) => format!("{k} (when {ck} = \"{cv}\")"),
        })
        .collect();
    format!(
        "{command}: required [{}], optional [{}]",
        req.join(", "),
        keys.join(", ")
    )
}

fn nearest<'a>(name: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<&'a str> {
    candidates
        .into_iter()
        .map(|c| (strsim::jaro_winkler(name, c), c))
        .filter(|(s, _)| *s > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub parameters: BTreeMap<String, Value>,
    pub input_paths: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}

/// Parses an override value as a TOML value; bare words become strings.
pub fn parse_override_value(text: &str) -> Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.to_string())),
        Err(_) => Value::String(text.to_string()),
    }
}

/// Flattens the document into `(key, value)` pairs, reporting misplaced
/// or unknown sections.
fn flatten(table: toml::Table, errors: &mut Vec<String>) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    for (key, value) in table {
        match value {
            Value::Table(inner) => {
                if !SECTIONS.contains(&key.as_str()) {
                    let hint = nearest(&key, SECTIONS.iter().copied())
                        .map(|s| format!(" (did you mean [{s}]?)"))
                        .unwrap_or_default();
                    errors.push(format!("unknown section [{key}]{hint}"));
                    continue;
                }
                for (k, v) in inner {
                    if matches!(v, Value::Table(_)) {
                        errors.push(format!("nested table [{key}.{k}] is not allowed"));
                    } else {
                        out.push((k, v));
                    }
                }
            }
            v => out.push((key, v)),
        }
    }
    out
}

fn check_value(spec: &KeySpec, value: &Value) -> Result<(), String> {
    let name = spec.name;
    match spec.kind {
        Kind::Float { min, max } => {
            let x = match value {
                Value::Float(x) => *x,
                Value::Integer(i) => *i as f64,
                other => return Err(format!("'{name}' must be a number, got {}", other.type_str())),
            };
            if !x.is_finite() {
                return Err(format!("'{name}' must be finite"));
            }
            if x < min || x > max {
                return Err(format!("'{name}' = {x} is outside [{min}, {max}]"));
            }
        }
        Kind::Int { min, max } => {
            let Value::Integer(i) = value else {
                return Err(format!("'{name}' must be an integer, got {}", value.type_str()));
            };
            if *i < min || *i > max {
                return Err(format!("'{name}' = {i} is outside [{min}, {max}]"));
            }
        }
        Kind::Bool => {
            if !matches!(value, Value::Boolean(_)) {
                return Err(format!("'{name}' must be true or false, got {}", value.type_str()));
            }
        }
        Kind::Choice(options) => {
            let Value::String(s) = value else {
                return Err(format!("'{name}' must be a string, got {}", value.type_str()));
            };
            if !options.contains(&s.as_str()) {
                let hint = nearest(s, options.iter().copied())
                    .map(|o| format!(", did you mean \"{o}\"?"))
                    .unwrap_or_default();
                return Err(format!(
                    "'{name}' = \"{s}\" is not one of [{}]{hint}",
                    options.join(", ")
                ));
            }
        }
        Kind::Path => {
            if !matches!(value, Value::String(s) if !s.is_empty()) {
                return Err(format!("'{name}' must be a non-empty path string"));
            }
        }
        Kind::Settings => {
            let Value::Array(items) = value else {
                return Err(format!("'{name}' must be a list of setting names"));
            };
            for item in items {
                match item {
                    Value::String(s) if qmetro::scenario::Setting::parse(s).is_ok() => {}
                    other => return Err(format!("'{name}' entry {other} is not a setting name")),
                }
            }
        }
    }
    Ok(())
}

/// Validates a configuration document together with command-line
/// overrides (which take precedence). Returns every problem found.
pub fn parse_config(
    text: &str,
    command: Option<Command>,
    overrides: &[(String, Value)],
) -> Result<RunConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let table = match text.parse::<toml::Table>() {
        Ok(t) => t,
        Err(e) => return Err(ConfigErrors(vec![format!("config is not valid TOML: {}", e.message())])),
    };
    let mut entries = flatten(table, &mut errors);
    entries.extend(overrides.iter().cloned());

    let mut merged: BTreeMap<String, Value> = BTreeMap::new();
    let mut file_command = None;
    let mut seed = 0u64;
    let mut out = PathBuf::from("out");
    for (key, value) in entries {
        if RUN_KEYS.contains(&key.as_str()) {
            match (key.as_str(), &value) {
                ("command", Value::String(s)) => match Command::parse(s) {
                    Some(c) => file_command = Some(c),
                    None => errors.push(format!("unknown command '{s}'")),
                },
                ("seed", Value::Integer(i)) if *i >= 0 => seed = *i as u64,
                ("out", Value::String(s)) if !s.is_empty() => out = PathBuf::from(s),
                (k, v) => errors.push(format!("'{k}' has invalid value {v}")),
            }
            continue;
        }
        merged.insert(key, value);
    }

    let command = match (command, file_command) {
        (Some(a), Some(b)) if a != b => {
            errors.push(format!("command '{a}' conflicts with command = \"{b}\" in the config"));
            a
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => {
            errors.push("no command given".to_string());
            return Err(ConfigErrors(errors));
        }
    };

    let mut inputs = Vec::new();
    for (key, value) in &merged {
        let Some(spec) = spec(key) else {
            let valid = KEYS
                .iter()
                .filter(|k| k.commands.contains(&command))
                .map(|k| k.name)
                .chain(RUN_KEYS.iter().copied());
            let hint = nearest(key, valid)
                .map(|k| format!(", nearest valid key is '{k}'"))
                .unwrap_or_default();
            errors.push(format!("unknown key '{key}'{hint}"));
            continue;
        };
        if !spec.commands.contains(&command) {
            errors.push(format!("key '{key}' does not apply to {}", schema(command)));
            continue;
        }
        if let Err(e) = check_value(spec, value) {
            errors.push(e);
            continue;
        }
        if matches!(spec.kind, Kind::Path) {
            if let Value::String(s) = value {
                inputs.push(PathBuf::from(s));
            }
        }
    }
    for (key, cond) in required(command) {
        let needed = match cond {
            None => true,
            Some((ck, cv)) => matches!(merged.get(ck), Some(Value::String(s)) if s == cv),
        };
        if needed && !merged.contains_key(key) {
            errors.push(format!("missing required key '{key}'; schema {}", schema(command)));
        }
    }
    if matches!(merged.get("measurement"), Some(Value::String(s)) if s == "product") && command == SimulateCounts {
        errors.push("simulate-counts needs a fixed detector, not measurement = \"product\"".to_string());
    }
    if let (Some(Value::Integer(n)), true) = (merged.get("mc_runs"), command == Tomography) {
        if *n == 1 {
            errors.push("'mc_runs' must be 0 or at least 2".to_string());
        }
    }

    if errors.is_empty() {
        Ok(RunConfig {
            command,
            parameters: merged,
            input_paths: inputs,
            output_dir: out,
            seed,
        })
    } else {
        Err(ConfigErrors(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, command: Command) -> Result<RunConfig, ConfigErrors> {
        parse_config(text, Some(command), &[])
    }

    #[test]
    fn minimal_kappa_scan() {
        let c = parse("family = \"phase-dephasing\"\nmeasurement = \"bell\"\n", KappaScan).unwrap();
        assert_eq!(c.command, KappaScan);
        assert_eq!(c.seed, 0);
        assert!(c.input_paths.is_empty());
    }

    #[test]
    fn visibility_out_of_range() {
        let e = parse("[gate]\nvisibility = 1.3\n", GateModel).unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert!(e.0[0].contains("visibility"), "{e}");
    }

    #[test]
    fn tomography_needs_counts() {
        let e = parse("", Tomography).unwrap_err();
        assert!(e.0[0].contains("counts") && e.0[0].contains("tomography:"), "{e}");
    }

    #[test]
    fn reports_every_error_with_suggestions() {
        let e = parse(
            "visibilty = 0.9\nfamily = \"two-phaze\"\nbudget = -3\n[sceanrio]\nphi = 1\n",
            KappaScan,
        )
        .unwrap_err();
        assert_eq!(e.0.len(), 4, "{e}");
        let all = e.to_string();
        assert!(all.contains("'visibilty'") && all.contains("'visibility'"));
        assert!(all.contains("did you mean \"two-phase\""));
        assert!(all.contains("[scenario]"));
        assert!(all.contains("budget"));
    }

    #[test]
    fn overrides_take_precedence() {
        let o = vec![
            ("visibility".to_string(), parse_override_value("0.5")),
            ("seed".to_string(), parse_override_value("7")),
        ];
        let c = parse_config("visibility = 0.9\n", Some(GateModel), &o).unwrap();
        assert_eq!(c.parameters["visibility"], Value::Float(0.5));
        assert_eq!(c.seed, 7);
        assert_eq!(parse_override_value("bell"), Value::String("bell".into()));
    }

    #[test]
    fn key_for_other_command() {
        let e = parse("trials = 5\n", Qfi).unwrap_err();
        assert!(e.0[0].contains("does not apply"), "{e}");
    }

    #[test]
    fn conditional_requirement() {
        assert!(parse("measurement = \"file\"\n", Optimize).is_err());
        let c = parse("measurement = \"file\"\npovm = \"p.json\"\n", Optimize).unwrap();
        assert_eq!(c.input_paths, vec![PathBuf::from("p.json")]);
    }
}
