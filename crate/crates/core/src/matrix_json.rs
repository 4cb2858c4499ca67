//! `serialize_with` helpers writing nalgebra values as plain JSON arrays
//! (vectors flat, matrices as a list of rows). Negative zero is written as 0.

use nalgebra::DMatrix;
use serde::ser::{SerializeSeq, Serializer};

use crate::{Mat3, Vec3};

fn clean(x: f64) -> f64 {
    x + 0.0
}

pub fn vec3<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|&x| clean(x)))
}

pub fn opt_vec3<S: Serializer>(v: &Option<Vec3>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => vec3(v, s),
        None => s.serialize_none(),
    }
}

fn rows<S: Serializer>(nrows: usize, ncols: usize, at: impl Fn(usize, usize) -> f64, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(nrows))?;
    for r in 0..nrows {
        let row: Vec<f64> = (0..ncols).map(|c| clean(at(r, c))).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

pub fn mat3<S: Serializer>(m: &Mat3, s: S) -> Result<S::Ok, S::Error> {
    rows(3, 3, |r, c| m[(r, c)], s)
}

pub fn opt_mat3<S: Serializer>(m: &Option<Mat3>, s: S) -> Result<S::Ok, S::Error> {
    match m {
        Some(m) => mat3(m, s),
        None => s.serialize_none(),
    }
}

pub fn dmat<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    rows(m.nrows(), m.ncols(), |r, c| m[(r, c)], s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Serialize;

    #[derive(Serialize)]
    struct Probe {
        #[serde(serialize_with = "vec3")]
        v: Vec3,
        #[serde(serialize_with = "mat3")]
        m: Mat3,
        #[serde(serialize_with = "opt_vec3")]
        none: Option<Vec3>,
        #[serde(serialize_with = "dmat")]
        d: DMatrix<f64>,
    }

    #[test]
    fn layout_is_row_major_nested() {
        let p = Probe {
            v: Vec3::new(1.0, 2.0, 3.0),
            m: Mat3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0),
            none: None,
            d: DMatrix::from_row_slice(2, 1, &[1.5, -0.0]),
        };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(
            json,
            r#"{"v":[1.0,2.0,3.0],"m":[[1.0,2.0,3.0],[4.0,5.0,6.0],[7.0,8.0,9.0]],"none":null,"d":[[1.5],[0.0]]}"#
        );
    }
}
