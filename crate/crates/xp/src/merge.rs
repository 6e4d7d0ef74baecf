//! Layering of user TOML over an experiment's defaults.

use sha2::{Digest, Sha256};
use toml::{Table, Value};

/// Merges `over` into `base`. Tables merge key by key; everything else is
/// replaced. A table whose `kind` differs from the default's replaces it
/// wholesale, so switching e.g. a coefficient from `affine` to `scott` does
/// not leave stale fields behind; such a table must be given in full.
pub fn deep_merge(base: &mut Table, over: &Table) {
    for (key, v) in over {
        match (base.get_mut(key), v) {
            (Some(Value::Table(b)), Value::Table(o))
                if o.get("kind").is_none_or(|k| b.get("kind") == Some(k)) =>
            {
                // `[claims]` takes exactly one of `k` / `intensity`.
                if key == "claims" {
                    if o.contains_key("k") {
                        b.remove("intensity");
                    }
                    if o.contains_key("intensity") {
                        b.remove("k");
                    }
                }
                deep_merge(b, o)
            }
            _ => {
                base.insert(key.clone(), v.clone());
            }
        }
    }
}

/// Hex SHA-256 of the canonical TOML rendering.
pub fn config_hash(cfg: &Table) -> String {
    let text = toml::to_string(cfg).unwrap_or_default();
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> Table {
        s.parse().unwrap()
    }

    #[test]
    fn nested_keys_merge() {
        let mut base = table("a = 1\n[s]\nx = 1\ny = 2\n");
        deep_merge(&mut base, &table("[s]\ny = 3\nz = 4\n"));
        assert_eq!(base, table("a = 1\n[s]\nx = 1\ny = 3\nz = 4\n"));
    }

    #[test]
    fn tagged_tables_replace() {
        let mut base = table("[m]\nmu = { kind = \"affine\", c0 = 1.0, c1 = 2.0 }\n");
        deep_merge(
            &mut base,
            &table("[m]\nmu = { kind = \"constant\", value = 3.0 }\n"),
        );
        assert_eq!(
            base,
            table("[m]\nmu = { kind = \"constant\", value = 3.0 }\n")
        );
        let mut base = table("[m]\nmu = { kind = \"affine\", c0 = 1.0, c1 = 2.0 }\n");
        deep_merge(
            &mut base,
            &table("[m]\nmu = { kind = \"affine\", c1 = 3.0 }\n"),
        );
        assert_eq!(
            base,
            table("[m]\nmu = { kind = \"affine\", c0 = 1.0, c1 = 3.0 }\n")
        );
    }

    #[test]
    fn intensity_forms_are_exclusive() {
        let mut base = table("[claims]\nk = 1.0\n");
        deep_merge(
            &mut base,
            &table("[claims]\nintensity = { kind = \"constant\", value = 2.0 }\n"),
        );
        assert!(!base["claims"].as_table().unwrap().contains_key("k"));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = table("x = 1\n");
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&table("x = 2\n")));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
