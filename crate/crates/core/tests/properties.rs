use grouprig::cocycle::{images_from_basis, BlockMap, CocycleSpec, FiniteGroup, HElem, HolonomySign, MetricGroup, TargetGroup};
use grouprig::group::{GroupElement, GroupModel, WordMetric};
use grouprig::invariants::{power_lengths_in, CompressionProfile};
use grouprig::shift::{glue, homoclinic_n, in_cone_set, shift_act, shifted_at, Configuration, ConeParams, Sign};
use proptest::prelude::*;
use std::sync::OnceLock;

fn models() -> &'static [GroupModel] {
    static M: OnceLock<Vec<GroupModel>> = OnceLock::new();
    M.get_or_init(|| {
        ["z", "z^2", "z^3", "heisenberg", "free:2", "prod(z,free:2)", "prod(heisenberg,z)"]
            .iter()
            .map(|d| GroupModel::parse(d).unwrap())
            .collect()
    })
}

fn heisenberg_metric() -> &'static WordMetric {
    static M: OnceLock<WordMetric> = OnceLock::new();
    M.get_or_init(|| WordMetric::new(&GroupModel::heisenberg(), 10).unwrap())
}

fn z2_metric() -> &'static WordMetric {
    static M: OnceLock<WordMetric> = OnceLock::new();
    M.get_or_init(|| WordMetric::new(&GroupModel::lattice(2).unwrap(), 200).unwrap())
}

fn word(max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(any::<prop::sample::Index>(), 0..=max_len).prop_map(|v| v.into_iter().map(|i| i.index(1 << 16)).collect())
}

fn element(m: &GroupModel, w: &[usize]) -> GroupElement {
    let k = m.generators().len();
    m.eval_word(&w.iter().map(|i| i % k).collect::<Vec<_>>())
}

fn configuration(radius: i64) -> impl Strategy<Value = Configuration> {
    prop::collection::btree_map((-radius..=radius, -radius..=radius), 1u8..2, 0..12).prop_map(|cells| {
        Configuration::from_entries(2, cells.into_iter().map(|((a, b), s)| (GroupElement::Lattice(vec![a, b]), s))).unwrap()
    })
}

fn z2_coboundary() -> &'static CocycleSpec {
    static C: OnceLock<CocycleSpec> = OnceLock::new();
    C.get_or_init(|| {
        let metric = WordMetric::new(&GroupModel::lattice(2).unwrap(), 12).unwrap();
        let m = metric.model().clone();
        let cells = ["e", "(1,0)", "(0,-1)"].iter().map(|s| m.parse_element(s).unwrap()).collect();
        let bstar = BlockMap::tabulate(&metric, 2, cells, |p| HElem::Vector(vec![f64::from(p[0]) * 0.75 - f64::from(p[1]) * 0.5 + f64::from(p[2]) * 0.125])).unwrap();
        let t = TargetGroup::real(1);
        let phi = images_from_basis(&m, &t, &[HElem::Vector(vec![0.5]), HElem::Vector(vec![-2.0])]).unwrap();
        CocycleSpec::coboundary(&metric, 2, t, &phi, &bstar).unwrap()
    })
}

fn targets() -> impl Strategy<Value = TargetGroup> {
    prop::sample::select(vec![TargetGroup::real(2), TargetGroup::torus(2), TargetGroup::cyclic(7).unwrap(), TargetGroup::Finite(FiniteGroup::s3())])
}

fn target_elem(t: &TargetGroup) -> BoxedStrategy<HElem> {
    match t {
        TargetGroup::Finite(g) => (0..g.order()).prop_map(HElem::Finite).boxed(),
        TargetGroup::RealVector(v) => prop::collection::vec(-1e3f64..1e3, v.dim).prop_map(HElem::Vector).boxed(),
        TargetGroup::Torus(v) => prop::collection::vec(0f64..1.0, v.dim).prop_map(HElem::Vector).boxed(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn group_axioms(mi in 0usize..7, a in word(12), b in word(12), c in word(12)) {
        let m = &models()[mi];
        let (a, b, c) = (element(m, &a), element(m, &b), element(m, &c));
        prop_assert_eq!(m.mul(&m.mul(&a, &b), &c), m.mul(&a, &m.mul(&b, &c)));
        prop_assert_eq!(m.mul(&a, &m.inverse(&a)), m.identity());
        prop_assert_eq!(m.mul(&m.inverse(&a), &a), m.identity());
        prop_assert_eq!(m.mul(&m.identity(), &a), a.clone());
        prop_assert!(m.contains(&a));
    }

    #[test]
    fn word_metric_is_a_metric(a in word(5), b in word(5), c in word(5)) {
        let metric = heisenberg_metric();
        let m = metric.model();
        let (a, b, c) = (element(m, &a), element(m, &b), element(m, &c));
        let d = |x: &GroupElement, y: &GroupElement| metric.distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(metric.length(&a).unwrap() <= 5);
    }

    #[test]
    fn target_metrics_are_bi_invariant((t, x, y, g) in targets().prop_flat_map(|t| {
        let e = target_elem(&t);
        (Just(t), e.clone(), e.clone(), e)
    })) {
        let d = t.dist(&x, &y);
        let tol = 1e-9 * (1.0 + d);
        prop_assert!((t.dist(&t.mul(&g, &x), &t.mul(&g, &y)) - d).abs() <= tol);
        prop_assert!((t.dist(&t.mul(&x, &g), &t.mul(&y, &g)) - d).abs() <= tol);
        prop_assert!((t.dist(&t.inv(&x), &t.inv(&y)) - d).abs() <= tol);
        prop_assert!(t.dist(&t.mul(&x, &t.inv(&x)), &t.identity()) <= 1e-9);
    }

    #[test]
    fn shift_is_a_left_action(g in word(6), h in word(6), x in configuration(4), k in word(6)) {
        let m = z2_metric().model();
        let (g, h, k) = (element(m, &g), element(m, &h), element(m, &k));
        prop_assert_eq!(shift_act(m, &g, &shift_act(m, &h, &x)), shift_act(m, &m.mul(&g, &h), &x));
        prop_assert_eq!(shifted_at(m, &m.inverse(&h), &x, &k), shift_act(m, &h, &x).at(&k));
    }

    #[test]
    fn homoclinic_radius_is_shift_equivariant(h in word(8), x in configuration(5), y in configuration(5)) {
        let metric = z2_metric();
        let m = metric.model();
        let h = element(m, &h);
        let n = homoclinic_n(metric, &x, &y).unwrap();
        let hn = homoclinic_n(metric, &shift_act(m, &h, &x), &shift_act(m, &h, &y)).unwrap();
        prop_assert!(hn <= n + metric.length(&h).unwrap());
    }

    #[test]
    fn gluing_lands_in_both_cone_sets(ai in 0usize..4, big_r in 0u64..5, x in configuration(6), outer in configuration(30)) {
        let metric = z2_metric();
        let m = metric.model();
        let a = m.parse_element(["(1,0)", "(0,1)", "(-1,0)", "(1,1)"][ai]).unwrap();
        let profile = CompressionProfile::new(power_lengths_in(metric, &a).unwrap()).unwrap();
        let params = ConeParams::new(metric, profile, big_r, 1.0, 0.0).unwrap();
        let n = params.n_spec().unwrap() as i64;
        // x' agrees with x on B(N) and follows `outer` elsewhere
        let mut xp = x.clone();
        for k in x.support().keys().chain(outer.support().keys()) {
            if metric.length(k).unwrap() as i64 > n {
                xp.set(k.clone(), outer.at(k)).unwrap();
            }
        }
        let y = glue(&x, &xp, &params).unwrap();
        prop_assert!(in_cone_set(&params, &x, &y, Sign::Plus).unwrap());
        prop_assert!(in_cone_set(&params, &xp, &y, Sign::Minus).unwrap());
    }

    #[test]
    fn certificates_are_sound(gi in 0usize..2, x in configuration(3), y in configuration(3), extra in 0u64..40) {
        let spec = z2_coboundary();
        let m = spec.model();
        let anchor = spec.anchor(&m.parse_element(["(1,0)", "(0,1)"][gi]).unwrap()).unwrap();
        for sign in [HolonomySign::Plus, HolonomySign::Minus] {
            let cert = spec.holonomy(&anchor, &x, &y, sign, 1e-8).unwrap();
            let partial = spec.partial_product(&anchor, &x, &y, cert.n_used + extra, sign);
            prop_assert!(spec.target().dist(&partial, &cert.value) <= cert.tail_bound + cert.rounding_bound);
        }
    }

    #[test]
    fn holonomy_is_antisymmetric(x in configuration(3), y in configuration(3)) {
        let spec = z2_coboundary();
        let t = spec.target();
        let anchor = spec.anchor(&spec.model().parse_element("(1,0)").unwrap()).unwrap();
        for sign in [HolonomySign::Plus, HolonomySign::Minus] {
            let xy = spec.holonomy(&anchor, &x, &y, sign, 1e-8).unwrap();
            let yx = spec.holonomy(&anchor, &y, &x, sign, 1e-8).unwrap();
            let slack = xy.tail_bound + yx.tail_bound + xy.rounding_bound + yx.rounding_bound;
            prop_assert!(t.dist(&t.mul(&xy.value, &yx.value), &t.identity()) <= slack + 1e-12);
        }
    }
}
