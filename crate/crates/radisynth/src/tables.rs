//! CSV tables: pore lists and training curves.

use radisynth_core::geom::Vec3;
use radisynth_core::nn::{EpochStats, TrainReport};
use radisynth_core::scene::PoreSpec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PORE_HEADER: &str = "id,cx,cy,cz,r,sx,sy,sz,rot_deg";
pub const CURVE_HEADER: &str = "epoch,loss,train_accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PoreRecord {
    id: usize,
    cx: f64,
    cy: f64,
    cz: f64,
    r: f64,
    sx: f64,
    sy: f64,
    sz: f64,
    rot_deg: f64,
}

fn csv_err(what: &str) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| {
        let offset = e.position().map(|p| p.byte());
        Error::parse(what, offset, e.to_string())
    }
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, what: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut empty = true;
    for r in rows {
        w.serialize(r).map_err(csv_err(what))?;
        empty = false;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::parse(what, None, e.to_string()))?;
    let s = String::from_utf8(bytes).expect("csv writer emits UTF-8");
    Ok(if empty { String::new() } else { s })
}

fn read_rows<T: serde::de::DeserializeOwned>(text: &str, header: &str, what: &str) -> Result<Vec<T>> {
    let first = text.lines().next().unwrap_or("");
    if first.trim() != header {
        return Err(Error::parse(what, Some(0), format!("header '{first}' is not '{header}'")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(csv_err(what))
}

/// One row per pore in list order; `r` is the base radius and `s*` the
/// per-axis scale factors.
pub fn pores_to_csv(pores: &[PoreSpec]) -> Result<String> {
    let body = write_rows(
        pores.iter().enumerate().map(|(id, p)| PoreRecord {
            id,
            cx: p.center.x,
            cy: p.center.y,
            cz: p.center.z,
            r: p.base_radius,
            sx: p.scale.x,
            sy: p.scale.y,
            sz: p.scale.z,
            rot_deg: p.rotation_z_deg,
        }),
        "pore table",
    )?;
    Ok(if body.is_empty() { format!("{PORE_HEADER}\n") } else { body })
}

pub fn pores_from_csv(text: &str) -> Result<Vec<PoreSpec>> {
    let rows: Vec<PoreRecord> = read_rows(text, PORE_HEADER, "pore table")?;
    Ok(rows
        .into_iter()
        .map(|r| PoreSpec {
            center: Vec3::new(r.cx, r.cy, r.cz),
            base_radius: r.r,
            scale: Vec3::new(r.sx, r.sy, r.sz),
            rotation_z_deg: r.rot_deg,
        })
        .collect())
}

pub fn curve_to_csv(report: &TrainReport) -> Result<String> {
    let body = write_rows(report.history.iter().copied(), "training curve")?;
    Ok(if body.is_empty() { format!("{CURVE_HEADER}\n") } else { body })
}

pub fn curve_from_csv(text: &str) -> Result<TrainReport> {
    let history: Vec<EpochStats> = read_rows(text, CURVE_HEADER, "training curve")?;
    Ok(TrainReport { history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pore_table_round_trip() {
        let pores = vec![
            PoreSpec {
                center: Vec3::new(1.5, -2.25, 0.125),
                base_radius: 0.5,
                scale: Vec3::new(0.7, 1.9, 1.1),
                rotation_z_deg: -33.5,
            };
            3
        ];
        let csv = pores_to_csv(&pores).unwrap();
        assert!(csv.starts_with(PORE_HEADER));
        assert_eq!(pores_from_csv(&csv).unwrap(), pores);
        assert_eq!(pores_to_csv(&[]).unwrap(), format!("{PORE_HEADER}\n"));
        assert!(pores_from_csv(&pores_to_csv(&[]).unwrap()).unwrap().is_empty());
    }

    #[test]
    fn curve_round_trip() {
        let r = TrainReport {
            history: vec![
                EpochStats { epoch: 0, loss: 0.69, train_accuracy: 0.5 },
                EpochStats { epoch: 1, loss: 0.31, train_accuracy: 0.875 },
            ],
        };
        let csv = curve_to_csv(&r).unwrap();
        assert!(csv.starts_with(CURVE_HEADER));
        assert_eq!(curve_from_csv(&csv).unwrap(), r);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(pores_from_csv("a,b\n1,2\n").is_err());
        let bad = format!("{PORE_HEADER}\n0,1,2,3,x,1,1,1,0\n");
        assert!(matches!(pores_from_csv(&bad), Err(Error::Parse { offset: Some(_), .. })));
    }
}
