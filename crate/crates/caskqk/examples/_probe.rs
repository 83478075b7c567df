use caskqk::cask::CaskDomain;
use caskqk::forms::{c64, max_abs, CVec};
use caskqk::hk::Numerics;
use caskqk::lattice::{BpsStructure, ChargeVector};
use caskqk::qk::QkPoint;

fn main() {
    let params = Numerics::default();
    for n in 0..=2usize {
        let m = n + 1;
        let dom = CaskDomain::chn(n, 0.1, Some(0.3));
        let mut v = vec![0i64; 2 * m];
        v[m] = 1;
        let bps = BpsStructure::new(vec![(ChargeVector::new(v), 1)], 2 * m).unwrap();
        let x = CVec::from_fn(n, |a, _| c64(0.2 - 0.08 * a as f64, 0.1 + 0.04 * a as f64));
        let tt: Vec<f64> = (0..m).map(|i| 0.5 + 0.4 * i as f64).collect();
        let th: Vec<f64> = (0..m).map(|i| 1.3 + 0.7 * i as f64).collect();
        for rho in [1.2f64, 3.0, 8.0] {
            let q = QkPoint::new(rho, x.clone(), tt.clone(), th.clone(), 0.37).unwrap();
            let ga = caskqk::bundle::qk_metric_global(&dom, &bps, &q, &params).unwrap();
            let gb = caskqk::qk::qk_metric_coord(&dom, &bps, &q, &params).unwrap();
            let gfs = caskqk::qk::fs_metric(&dom, &q).unwrap();
            let diff = max_abs(&(ga.matrix.clone() - gb.matrix.clone()));
            let inst_size = max_abs(&(gb.matrix.clone() - gfs.matrix.clone()));
            println!("n={n} rho={rho}: route diff {diff:.3e}, instanton deviation from FS {inst_size:.3e}");
        }
    }
}
