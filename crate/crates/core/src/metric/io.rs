use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CurvatureField, Topology, WarpedState};
use crate::error::Result;

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    x: f64,
    phi: f64,
    psi: f64,
}

#[derive(Debug, Serialize)]
struct CurvatureRow {
    node: usize,
    s: f64,
    #[serde(rename = "kRad")]
    k_rad: f64,
    #[serde(rename = "kSph")]
    k_sph: f64,
    #[serde(rename = "normRm")]
    norm_rm: f64,
    #[serde(rename = "normRic")]
    norm_ric: f64,
    #[serde(rename = "normDRic")]
    norm_dric: f64,
    #[serde(rename = "normD2Ric")]
    norm_d2ric: f64,
}

/// Reads a profile with columns `x, phi, psi`.
pub fn read_profile<R: Read>(reader: R, n: usize, topology: Topology) -> Result<WarpedState> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let (mut x, mut phi, mut psi) = (Vec::new(), Vec::new(), Vec::new());
    for row in rdr.deserialize() {
        let r: ProfileRow = row?;
        x.push(r.x);
        phi.push(r.phi);
        psi.push(r.psi);
    }
    WarpedState::new(n, topology, x, phi, psi)
}

pub fn load_profile(path: &std::path::Path, n: usize, topology: Topology) -> Result<WarpedState> {
    read_profile(std::fs::File::open(path)?, n, topology)
}

pub fn write_profile<W: Write>(writer: W, state: &WarpedState) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for j in 0..state.len() {
        w.serialize(ProfileRow { x: state.x[j], phi: state.phi[j], psi: state.psi[j] })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a per-node curvature dump. Missing derivative norms are written as NaN.
pub fn write_curvature<W: Write>(writer: W, field: &CurvatureField) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for j in 0..field.len() {
        let pick = |v: &Option<Vec<f64>>| v.as_ref().map_or(f64::NAN, |v| v[j]);
        w.serialize(CurvatureRow {
            node: j,
            s: field.s[j],
            k_rad: field.k_rad[j],
            k_sph: field.k_sph[j],
            norm_rm: field.norm_rm[j],
            norm_ric: field.norm_ric[j],
            norm_dric: pick(&field.norm_dric),
            norm_d2ric: pick(&field.norm_d2ric),
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::fixtures::constant_curvature_state;

    #[test]
    fn profile_round_trips_through_csv() {
        let st = constant_curvature_state(3, 1.0, Topology::Sphere, 41).unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &st).unwrap();
        let back = read_profile(buf.as_slice(), 3, Topology::Sphere).unwrap();
        assert_eq!(back.x, st.x);
        assert_eq!(back.psi, st.psi);
    }

    #[test]
    fn curvature_dump_has_expected_header() {
        let st = constant_curvature_state(3, 1.0, Topology::Sphere, 41).unwrap();
        let f = crate::metric::geometry(&st).unwrap();
        let mut buf = Vec::new();
        write_curvature(&mut buf, &f).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("node,s,kRad,kSph,normRm,normRic,normDRic,normD2Ric\n"));
        assert_eq!(text.lines().count(), 42);
    }
}
