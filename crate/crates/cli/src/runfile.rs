//! TOML run files. Each key of `[args]` is a long flag:
//!
//! ```toml
//! command = "gram"
//! [args]
//! data = "data/MUTAG"
//! depth = 4
//! normalize = true
//! out = "mutag.gram"
//! ```
//!
//! `true` becomes a bare flag, `false` drops it, and underscores in keys
//! become dashes.

use std::path::Path;

use anyhow::{bail, Context};
use toml::Value;

pub fn argv_from_str(text: &str) -> anyhow::Result<Vec<String>> {
    let doc: toml::Table = text.parse().context("parsing run file")?;
    let command = match doc.get("command") {
        Some(Value::String(c)) => c.clone(),
        _ => bail!("run file needs a string `command`"),
    };
    let mut argv = vec![command];
    if let Some(args) = doc.get("args") {
        let Value::Table(args) = args else {
            bail!("`args` must be a table");
        };
        for (key, value) in args {
            let flag = format!("--{}", key.replace('_', "-"));
            match value {
                Value::Boolean(true) => argv.push(flag),
                Value::Boolean(false) => {}
                Value::String(s) => argv.extend([flag, s.clone()]),
                Value::Integer(i) => argv.extend([flag, i.to_string()]),
                Value::Float(f) => argv.extend([flag, f.to_string()]),
                other => bail!("flag `{key}` has unsupported value {other}"),
            }
        }
    }
    for key in doc.keys() {
        if key != "command" && key != "args" {
            bail!("unknown run file key `{key}`");
        }
    }
    Ok(argv)
}

pub fn argv_from_file(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    argv_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_from_table() {
        let argv = argv_from_str(
            "command = \"gram\"\n[args]\ndata = \"d\"\ndepth = 2\ngamma = 0.5\nnormalize = true\nedge_elements = \"off\"\ntau = 0.0\n",
        )
        .unwrap();
        assert_eq!(argv[0], "gram");
        let rest = argv[1..].join(" ");
        assert!(rest.contains("--data d"));
        assert!(rest.contains("--depth 2"));
        assert!(rest.contains("--gamma 0.5"));
        assert!(rest.contains("--normalize"));
        assert!(rest.contains("--edge-elements off"));
        assert!(rest.contains("--tau 0"));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(argv_from_str("[args]\ndata = \"d\"\n").is_err());
        assert!(argv_from_str("command = \"gram\"\nextra = 1\n").is_err());
        assert!(argv_from_str("command = \"gram\"\n[args]\nlist = [1, 2]\n").is_err());
    }
}
