//! Plain-text formats for ensemble and reservoir descriptions.
//!
//! An ensemble file holds one `beta <float>` line, one `mu <float>...` line,
//! and one `state <int counts...> <float energy>` line per microstate.
//! A reservoir file holds `sites <int>`, `total_energy <int>`, an optional
//! `total_particles <int>`, and the same `state` lines (with a single count
//! and an integer energy). Blank lines and lines starting with `#` are
//! ignored.

use std::path::Path;

use super::{EnsembleSpec, Microstate, ReservoirModel};
use crate::{Error, Result};

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<EnsembleSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_ensemble(&text, path)
}

pub fn load_reservoir(path: impl AsRef<Path>) -> Result<ReservoirModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_reservoir(&text, path)
}

pub fn parse_ensemble(text: &str, path: impl AsRef<Path>) -> Result<EnsembleSpec> {
    let path = path.as_ref();
    let mut beta: Option<f64> = None;
    let mut potentials: Option<Vec<f64>> = None;
    let mut microstates = Vec::new();

    for (lineno, raw) in directive_lines(text) {
        let mut fields = raw.split_whitespace();
        let directive = fields.next().expect("directive_lines yields non-empty");
        let rest: Vec<&str> = fields.collect();
        match directive {
            "beta" => {
                if beta.is_some() {
                    return Err(Error::parse(path, lineno, "duplicate beta line"));
                }
                beta = Some(parse_one_float(path, lineno, &rest, "beta")?);
            }
            "mu" => {
                if potentials.is_some() {
                    return Err(Error::parse(path, lineno, "duplicate mu line"));
                }
                let values = rest
                    .iter()
                    .map(|f| parse_float(path, lineno, f))
                    .collect::<Result<Vec<f64>>>()?;
                potentials = Some(values);
            }
            "state" => {
                let k = potentials
                    .as_ref()
                    .ok_or_else(|| {
                        Error::parse(path, lineno, "state line before the mu line")
                    })?
                    .len();
                if rest.len() != k + 1 {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!(
                            "state line needs {k} counts and one energy, got {} fields",
                            rest.len()
                        ),
                    ));
                }
                let counts = rest[..k]
                    .iter()
                    .map(|f| parse_count(path, lineno, f))
                    .collect::<Result<Vec<u64>>>()?;
                let energy = parse_float(path, lineno, rest[k])?;
                microstates.push(Microstate::new(counts, energy));
            }
            other => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unknown directive {other:?} in ensemble file"),
                ));
            }
        }
    }

    let beta = beta.ok_or_else(|| Error::parse(path, 0, "missing beta line"))?;
    let potentials = potentials.ok_or_else(|| Error::parse(path, 0, "missing mu line"))?;
    if microstates.is_empty() {
        return Err(Error::parse(path, 0, "ensemble file lists no states"));
    }
    EnsembleSpec::new(beta, potentials, microstates)
}

pub fn parse_reservoir(text: &str, path: impl AsRef<Path>) -> Result<ReservoirModel> {
    let path = path.as_ref();
    let mut sites: Option<u64> = None;
    let mut total_energy: Option<u64> = None;
    let mut total_particles: Option<u64> = None;
    let mut system_states = Vec::new();

    for (lineno, raw) in directive_lines(text) {
        let mut fields = raw.split_whitespace();
        let directive = fields.next().expect("directive_lines yields non-empty");
        let rest: Vec<&str> = fields.collect();
        match directive {
            "sites" => {
                sites = Some(parse_one_count(path, lineno, &rest, "sites")?);
            }
            "total_energy" => {
                total_energy = Some(parse_one_count(path, lineno, &rest, "total_energy")?);
            }
            "total_particles" => {
                total_particles = Some(parse_one_count(path, lineno, &rest, "total_particles")?);
            }
            "state" => {
                if rest.len() != 2 {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!(
                            "reservoir state line needs one count and one energy, got {} fields",
                            rest.len()
                        ),
                    ));
                }
                let count = parse_count(path, lineno, rest[0])?;
                let energy = parse_float(path, lineno, rest[1])?;
                system_states.push(Microstate::new(vec![count], energy));
            }
            other => {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("unknown directive {other:?} in reservoir file"),
                ));
            }
        }
    }

    let sites = sites.ok_or_else(|| Error::parse(path, 0, "missing sites line"))?;
    let total_energy =
        total_energy.ok_or_else(|| Error::parse(path, 0, "missing total_energy line"))?;
    if system_states.is_empty() {
        return Err(Error::parse(path, 0, "reservoir file lists no states"));
    }
    ReservoirModel::new(system_states, sites, total_energy, total_particles)
}

fn directive_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty() && !line.starts_with('#'))
}

fn parse_float(path: &Path, lineno: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| Error::parse(path, lineno, format!("expected a real number, got {field:?}")))
}

fn parse_count(path: &Path, lineno: usize, field: &str) -> Result<u64> {
    field.parse::<u64>().map_err(|_| {
        Error::parse(
            path,
            lineno,
            format!("expected a non-negative integer, got {field:?}"),
        )
    })
}

fn parse_one_float(path: &Path, lineno: usize, fields: &[&str], what: &str) -> Result<f64> {
    if fields.len() != 1 {
        return Err(Error::parse(
            path,
            lineno,
            format!("{what} takes exactly one value"),
        ));
    }
    parse_float(path, lineno, fields[0])
}

fn parse_one_count(path: &Path, lineno: usize, fields: &[&str], what: &str) -> Result<u64> {
    if fields.len() != 1 {
        return Err(Error::parse(
            path,
            lineno,
            format!("{what} takes exactly one value"),
        ));
    }
    parse_count(path, lineno, fields[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_ensemble() {
        let text = "# two species\nbeta 1.5\nmu 0.5 -0.25\nstate 0 1 2.0\nstate 1 0 0\n";
        let spec = parse_ensemble(text, "mem.ens").unwrap();
        assert_eq!(spec.beta, 1.5);
        assert_eq!(spec.potentials, vec![0.5, -0.25]);
        assert_eq!(spec.microstates.len(), 2);
        assert_eq!(spec.microstates[0].counts, vec![0, 1]);
        assert_eq!(spec.microstates[0].energy, 2.0);
    }

    #[test]
    fn parse_errors_cite_file_and_line() {
        let text = "beta 1.0\nmu 0.0\nstate nope 1.0\n";
        match parse_ensemble(text, "bad.ens") {
            Err(Error::Parse { path, line, .. }) => {
                assert_eq!(path.to_str().unwrap(), "bad.ens");
                assert_eq!(line, 3);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_field_count_is_rejected() {
        let text = "beta 1.0\nmu 0.0 0.0\nstate 1 2.0\n";
        assert!(parse_ensemble(text, "bad.ens").is_err());
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(parse_ensemble("mu 0.0\nstate 0 1.0\n", "x.ens").is_err());
        assert!(parse_ensemble("beta 1.0\nstate 0 1.0\n", "x.ens").is_err());
        assert!(parse_ensemble("beta 1.0\nmu 0.0\n", "x.ens").is_err());
    }

    #[test]
    fn parses_a_reservoir_with_particles() {
        let text = "sites 3\ntotal_energy 2\ntotal_particles 5\nstate 0 0\nstate 1 1\n";
        let model = parse_reservoir(text, "mem.res").unwrap();
        assert_eq!(model.reservoir_sites, 3);
        assert_eq!(model.total_energy, 2);
        assert_eq!(model.total_particles, Some(5));
        assert_eq!(model.system_states.len(), 2);
    }

    #[test]
    fn reservoir_rejects_ensemble_directives() {
        let text = "beta 1.0\nsites 3\ntotal_energy 2\nstate 0 0\n";
        match parse_reservoir(text, "mixed.res") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("three.ens");
        std::fs::write(&path, "beta 1\nmu 0.5\nstate 0 0\nstate 1 1\nstate 2 2\n").unwrap();
        let spec = load_ensemble(&path).unwrap();
        assert_eq!(spec.microstates.len(), 3);
    }
}
