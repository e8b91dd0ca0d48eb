use std::fmt::Write as _;
use std::io::Write;

use super::{AbstractionError, FiniteTS};

impl FiniteTS {
    pub fn to_json(&self) -> Result<String, AbstractionError> {
        serde_json::to_string_pretty(self).map_err(|e| AbstractionError::Export(e.to_string()))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph ts {\n");
        for i in 0..self.len() {
            let s = self.state(i);
            let label = if Some(i) == self.sink() {
                "out".to_string()
            } else {
                let atoms: Vec<&str> = self
                    .atoms()
                    .iter()
                    .zip(&s.obs.atoms)
                    .filter(|(_, v)| **v)
                    .map(|(a, _)| a.as_str())
                    .collect();
                format!("{i}\\nmode {:?}\\n{{{}}}", s.obs.modes, atoms.join(","))
            };
            writeln!(out, "  s{i} [label=\"{label}\"];").unwrap();
        }
        for i in 0..self.len() {
            for j in self.successors(i) {
                writeln!(out, "  s{i} -> s{j};").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }

    /// One row per polytope piece: owning state, piece index, modes, atom
    /// labels, the H-representation and (in the plane) closure vertices.
    pub fn write_partition_csv<W: Write>(&self, w: W) -> Result<(), AbstractionError> {
        let err = |e: csv::Error| AbstractionError::Export(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["state", "piece", "modes", "atoms", "H", "K", "vertices"])
            .map_err(err)?;
        for i in self.cells() {
            let s = self.state(i);
            let modes = s.obs.modes.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";");
            let atoms = s.obs.atoms.iter().map(|a| if *a { "1" } else { "0" }).collect::<String>();
            for (k, p) in s.region.pieces().iter().enumerate() {
                let rows: Vec<(Vec<f64>, f64)> = (0..p.num_halfspaces()).map(|r| p.row(r)).collect();
                let h = rows
                    .iter()
                    .map(|(h, _)| h.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join(";");
                let kk = rows.iter().map(|(_, k)| k.to_string()).collect::<Vec<_>>().join(";");
                let verts = p
                    .vertices_2d()
                    .iter()
                    .map(|v| format!("{} {}", v[0], v[1]))
                    .collect::<Vec<_>>()
                    .join(";");
                out.write_record([i.to_string(), k.to_string(), modes.clone(), atoms.clone(), h, kk, verts])
                    .map_err(err)?;
            }
        }
        out.flush().map_err(|e| AbstractionError::Export(e.to_string()))
    }
}
