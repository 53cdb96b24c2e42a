use std::time::Instant;

use integrable_core::bachet::{
    bachet_map, bachet_point, bachet_x, chain, compose_maps, division_poly_map, parse_rational, Curve, CurvePoint,
    RationalMap1D,
};
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(s: &str) -> BigRational {
    parse_rational(s).unwrap()
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(v.into())
}

fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    BigRational::new(rng.random_range(-40i64..=40).into(), rng.random_range(1i64..=15).into())
}

/// A random point `(a/d², b/d³)` and the curve through it.
fn random_point(rng: &mut ChaCha8Rng) -> (Curve, CurvePoint) {
    loop {
        let d: i64 = rng.random_range(1..=4);
        let x = BigRational::new(rng.random_range(-6i64..=6).into(), (d * d).into());
        let y = BigRational::new(rng.random_range(-9i64..=9).into(), (d * d * d).into());
        let c = &y * &y - &x * &x * &x;
        if c.is_zero() || y.is_zero() {
            continue;
        }
        let curve = Curve::new(c).unwrap();
        let p = curve.point(x, y).unwrap();
        return (curve, p);
    }
}

#[test]
fn chain_from_three_five() {
    let curve = Curve::from_i64(-2).unwrap();
    let ch = chain(&curve.point(int(3), int(5)).unwrap(), &curve, 2).unwrap();
    let p1 = &ch.entries[1].point;
    let p2 = &ch.entries[2].point;
    assert_eq!(p1.x(), Some(&q("129/100")));
    assert_eq!(p1.y(), Some(&q("383/1000")));
    assert_eq!(p2.x(), Some(&q("2340922881/58675600")));
    // The unique on-curve value for this x.
    let y2 = q("113259286337279/449455096000");
    assert_eq!(p2.y().map(|y| if *y < BigRational::zero() { -y } else { y.clone() }), Some(y2));
}

#[test]
fn chain_json_is_exact() {
    let curve = Curve::from_i64(-2).unwrap();
    let ch = chain(&curve.point(int(3), int(5)).unwrap(), &curve, 2).unwrap();
    let json = ch.to_json();
    assert!(json.contains("\"129/100\""));
    assert!(json.contains("\"2340922881/58675600\""));
    let back: integrable_core::bachet::BachetChain = serde_json::from_str(&json).unwrap();
    assert_eq!(back, ch);
}

#[test]
fn chain_points_stay_on_curve_and_heights_quadruple() {
    let curve = Curve::from_i64(-2).unwrap();
    let ch = chain(&curve.point(int(3), int(5)).unwrap(), &curve, 6).unwrap();
    for p in ch.points() {
        let (x, y) = (p.x().unwrap(), p.y().unwrap());
        assert!(curve.contains(x, y));
    }
    for k in 3..6 {
        let ratio = ch.entries[k + 1].x_den_bits as f64 / ch.entries[k].x_den_bits as f64;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio} at step {k}");
    }
}

#[test]
fn bachet_point_matches_group_doubling() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        let (curve, p) = random_point(&mut rng);
        let b = bachet_point(&p, &curve);
        let d = curve.double(&p);
        assert!(b.eq_up_to_sign(&d));
        if let (Some(x), Some(bx)) = (p.x(), b.x()) {
            assert_eq!(bachet_x(x, curve.c()).as_ref(), Some(bx));
            assert!(curve.contains(bx, b.y().unwrap()));
        }
    }
}

#[test]
fn division_maps_match_group_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        let (curve, p) = random_point(&mut rng);
        for n in 2..=6u32 {
            let bn = division_poly_map(n, curve.c()).unwrap();
            let np = curve.multiply(&p, n as u64);
            match (bn.eval(p.x().unwrap()), np.x()) {
                (Some(v), Some(x)) => assert_eq!(&v, x, "n = {n}"),
                (None, None) => {}
                (a, b) => panic!("pole mismatch for n = {n}: {a:?} vs {b:?}"),
            }
        }
    }
    let curve = Curve::from_i64(-2).unwrap();
    let p = curve.point(int(3), int(5)).unwrap();
    let b3 = division_poly_map(3, curve.c()).unwrap();
    assert_eq!(b3.eval(&int(3)).as_ref(), curve.multiply(&p, 3).x());
}

#[test]
fn division_map_degrees() {
    for n in 2..=6u32 {
        let bn = division_poly_map(n, &int(-2)).unwrap();
        assert_eq!(bn.numerator().degree(), Some((n * n) as usize));
        assert_eq!(bn.denominator().degree(), Some((n * n - 1) as usize));
    }
}

#[test]
fn family_commutes_and_composes() {
    let start = Instant::now();
    for c in [-2, 1, 3] {
        let c = int(c);
        let maps: Vec<RationalMap1D> = (2..=4).map(|n| division_poly_map(n, &c).unwrap()).collect();
        for i in 0..maps.len() {
            for j in i + 1..maps.len() {
                let ab = compose_maps(&maps[i], &maps[j]).unwrap();
                let ba = compose_maps(&maps[j], &maps[i]).unwrap();
                assert_eq!(ab, ba);
            }
        }
        let b2 = &maps[0];
        let b3 = &maps[1];
        assert_eq!(compose_maps(b2, b2).unwrap(), maps[2]);
        assert_eq!(compose_maps(b2, b3).unwrap(), division_poly_map(6, &c).unwrap());
    }
    eprintln!("commutation checks took {:?}", start.elapsed());
}

#[test]
fn composition_evaluates_pointwise() {
    let c = int(-2);
    let f = bachet_map(&c).unwrap();
    let g = division_poly_map(3, &c).unwrap();
    let fg = compose_maps(&f, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0;
    while checked < 20 {
        let x = random_rational(&mut rng);
        let Some(gx) = g.eval(&x) else { continue };
        let Some(fgx) = f.eval(&gx) else { continue };
        assert_eq!(fg.eval(&x), Some(fgx));
        checked += 1;
    }
}
