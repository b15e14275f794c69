//! Subcommand execution and report formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use gauge_strata::constraints::{
    qc_check, same_symmetry_tangents, symmetry_space, verify_splittings,
};
use gauge_strata::groundstate::{format_significant, scan_grid, SigmaProblem};
use gauge_strata::strata::classify;
use gauge_strata::Error as CoreError;

use crate::config::RunConfig;
use crate::error::CliError;

const DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Classify,
    Sigma { quadrature: bool },
    Resolvent { lambda: f64 },
    Scan { out: Option<PathBuf> },
    QcCheck,
    Splittings,
    Symmetries { tangents: bool },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Sigma { .. } => "sigma",
            Command::Resolvent { .. } => "resolvent",
            Command::Scan { .. } => "scan",
            Command::QcCheck => "qc-check",
            Command::Splittings => "splittings",
            Command::Symmetries { .. } => "symmetries",
        }
    }
}

/// Ordered `key = value` lines.
struct Report(Vec<(&'static str, String)>);

impl Report {
    fn new(command: &Command, relation: &str, config: &RunConfig) -> Self {
        let mut r = Report(Vec::new());
        r.put("command", command.name());
        r.put("relation", relation);
        r.put("group", config.group.to_string());
        r
    }

    fn put(&mut self, key: &'static str, value: impl Into<String>) {
        self.0.push((key, value.into()));
    }

    fn num(&mut self, key: &'static str, x: f64) {
        self.put(key, format_significant(x, DIGITS));
    }

    fn int(&mut self, key: &'static str, n: usize) {
        self.put(key, n.to_string());
    }

    fn flag(&mut self, key: &'static str, b: bool) {
        self.put(key, b.to_string());
    }

    fn lattice(&mut self, config: &RunConfig) {
        if let Some(l) = &config.lattice {
            self.int("lattice_size", l.size);
            self.num("lattice_spacing", l.spacing);
            self.put("stencil", l.stencil.to_string());
            self.put("seed", l.seed.to_string());
        }
    }

    fn write(&self, out: &mut dyn Write) -> std::io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Runs `command` and writes its report to `out`.
pub fn run(command: &Command, config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let report = match command {
        Command::Classify => {
            let field = config.constant_field()?;
            let s = classify(&field, config.mode)?;
            let mut r = Report::new(command, "isotropy = centralizer(holonomy)", config);
            r.put("field", config.field_label());
            r.put("mode", config.mode.label());
            r.int("stratum", s.stratum_index);
            r.put("isotropy", s.isotropy_label);
            r.int("isotropy_dim", s.isotropy_dim);
            r.put("subbundle", s.subbundle_label);
            r.int("holonomy_dim", s.holonomy_dim);
            r
        }
        Command::Sigma { quadrature } => {
            let field = config.constant_field()?;
            let problem = SigmaProblem::from_field(&field);
            let res = if *quadrature {
                problem.sigma_quadrature(&config.tolerances.quadrature())?
            } else {
                problem.sigma_spectral()
            };
            let mut r = Report::new(
                command,
                "sigma = B^T (R.R)^(-1/2) B / g; ln psi0 = -(V g / 2) sigma",
                config,
            );
            r.put("field", config.field_label());
            r.put("method", res.method.to_string());
            r.num("coupling", config.coupling);
            r.num("volume", config.volume);
            r.num("sigma", res.sigma);
            r.flag("divergent", res.divergent);
            r.num("log_psi0", res.log_psi0(config.volume, config.coupling));
            if *quadrature && !res.divergent {
                r.int("nodes", res.nodes);
                r.num("error_estimate", res.error_estimate);
            }
            r
        }
        Command::Resolvent { lambda } => {
            let field = config.constant_field()?;
            let problem = SigmaProblem::from_field(&field);
            let mut r = Report::new(command, "F(lambda) = B^T (lambda + R.R)^(-1) B", config);
            r.put("field", config.field_label());
            r.num("lambda", *lambda);
            match problem.resolvent_form(*lambda) {
                Ok(v) => {
                    r.num("value", v);
                    r.flag("divergent", false);
                }
                Err(CoreError::Divergent(_)) => {
                    r.num("value", f64::INFINITY);
                    r.flag("divergent", true);
                }
                Err(e) => return Err(e.into()),
            }
            r
        }
        Command::Scan { out: path } => {
            let spec = config.scan_spec()?;
            let table = scan_grid(&spec)?;
            match path {
                Some(path) => {
                    let file = File::create(path).map_err(|source| CliError::Io {
                        path: path.display().to_string(),
                        source,
                    })?;
                    let mut w = BufWriter::new(file);
                    table.write_delimited(&mut w, ',')?;
                    w.flush()?;
                    let mut r = Report::new(command, "sigma over a parameter grid", config);
                    r.put("field", spec.ansatz.to_string());
                    r.put("columns", table.header.join(","));
                    r.int("rows", table.rows.len());
                    r.int("divergent_rows", table.rows.iter().filter(|row| row.divergent).count());
                    r.put("out", path.display().to_string());
                    r
                }
                None => {
                    table.write_delimited(&mut *out, ',')?;
                    return Ok(());
                }
            }
        }
        Command::QcCheck => {
            let (bg, t) = config.lattice_data()?;
            let q = qc_check(&bg, &t, config.tolerances.membership)?;
            let mut r = Report::new(
                command,
                "J'(Jt) = 0; J'(t) = 0; [a ^ e] = 0",
                config,
            );
            r.lattice(config);
            r.num("coupling", config.coupling);
            r.num("slice_residual", q.slice_residual);
            r.num("linear_residual", q.linear_residual);
            r.num("quadratic_residual", q.quadratic_residual);
            r.num("tolerance", q.tolerance);
            r.flag("member", q.member);
            r
        }
        Command::Splittings => {
            let (bg, _) = config.lattice_data()?;
            let s = verify_splittings(&bg)?;
            let mut r = Report::new(
                command,
                "T = ker J' + im J'*; T* = ker J'* + im J'",
                config,
            );
            r.lattice(config);
            r.int("dim_tangent", s.dim_total);
            r.int("dim_dual", s.dim_dual);
            r.int("dim_ker_jprime", s.dim_ker_jprime);
            r.int("dim_im_jprime_adjoint", s.dim_im_jprime_adj);
            r.int("dim_ker_jprime_adjoint", s.dim_ker_jprime_adj);
            r.int("dim_im_jprime", s.dim_im_jprime);
            r.num("orthogonality_residual", s.orth_residual);
            r.num("adjoint_residual", s.adjoint_residual);
            r.flag("tangent_split", s.tangent_split_holds());
            r.flag("dual_split", s.dual_split_holds());
            r
        }
        Command::Symmetries { tangents } => {
            let (bg, _) = config.lattice_data()?;
            let sym = symmetry_space(&bg)?;
            let mut r = Report::new(command, "symmetries = ker J'*", config);
            r.lattice(config);
            r.int("dim_symmetries", sym.len());
            if *tangents {
                let same = same_symmetry_tangents(&bg)?;
                r.int("dim_same_symmetry_tangents", same.len());
            }
            r
        }
    };
    report.write(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gauge_strata::Ansatz;

    fn output(cmd: Command, c: &RunConfig) -> String {
        let mut buf = Vec::new();
        run(&cmd, c, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn sigma_report_lines() {
        let c = RunConfig::for_ansatz(Ansatz::Su2Diag, &[0.0, 1.0, 1.0]);
        let s = output(Command::Sigma { quadrature: false }, &c);
        assert!(s.starts_with("command = sigma\n"), "{s}");
        assert!(s.contains("sigma = 0.707106781187\n"), "{s}");
        assert!(s.contains("divergent = false\n"), "{s}");
        let q = output(Command::Sigma { quadrature: true }, &c);
        assert!(q.contains("sigma = 0.70710678118"), "{q}");
    }

    #[test]
    fn resolvent_at_zero_on_a_zero_field() {
        // B = 0 has no kernel overlap, so the form is 0.
        let c = RunConfig::for_ansatz(Ansatz::Su2Diag, &[0.0, 0.0, 0.0]);
        let s = output(Command::Resolvent { lambda: 0.0 }, &c);
        assert!(s.contains("value = 0\n"), "{s}");
    }
}
