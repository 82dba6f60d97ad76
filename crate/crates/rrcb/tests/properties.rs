//! Property-based invariants over randomized inputs: the reward kernel's
//! range and monotonicity, the rotation-quotient metric structure of the
//! angular distance, serialization round trips, and the rigid-fit
//! orientation guarantee.

use proptest::prelude::*;
use rrcb::data::{BehaviorTag, Dataset, EpisodeMeta, Quality};
use rrcb::geom::{angular_distance, kernel, rigid_fit, KernelParams, Task, UnitQuat, Vec3};

fn quat_strategy() -> impl Strategy<Value = UnitQuat> {
    // Rejection-free: any non-tiny 4-vector normalizes to a rotation.
    (
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
        -1.0f64..1.0,
    )
        .prop_filter_map("norm too small", |(w, x, y, z)| {
            let n2 = w * w + x * x + y * y + z * z;
            if n2 < 1e-3 {
                None
            } else {
                Some(UnitQuat::from_unnormalized(w, x, y, z))
            }
        })
}

proptest! {
    #[test]
    fn kernel_stays_in_unit_interval_and_decreases(
        a in 0.5f64..100.0,
        b in 0.0f64..20.0,
        d1 in 0.0f64..0.5,
        d2 in 0.0f64..0.5,
    ) {
        let params = KernelParams::new(a, b).unwrap();
        let k1 = kernel(d1, &params);
        let k2 = kernel(d2, &params);
        prop_assert!(k1 > 0.0 && k1 <= 1.0);
        if d1 < d2 {
            prop_assert!(k1 > k2);
        }
        prop_assert_eq!(kernel(0.0, &params), 1.0);
    }

    #[test]
    fn angular_distance_is_sign_invariant_and_symmetric(
        q1 in quat_strategy(),
        q2 in quat_strategy(),
    ) {
        let d = angular_distance(q1, q2);
        prop_assert!((0.0..=180.0 + 1e-9).contains(&d));
        prop_assert!((d - angular_distance(q2, q1)).abs() < 1e-9);
        let neg = UnitQuat::from_unnormalized(-q1.w, -q1.x, -q1.y, -q1.z);
        prop_assert!((d - angular_distance(neg, q2)).abs() < 1e-9);
        // acos conditioning floors the self-distance around 1e-6 degrees.
        prop_assert!(angular_distance(q1, q1) < 1e-5);
    }

    #[test]
    fn rigid_fit_of_rotated_tetrahedron_is_proper(
        q in quat_strategy(),
        tx in -0.1f64..0.1,
        ty in -0.1f64..0.1,
        tz in -0.1f64..0.1,
    ) {
        let pts = [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.05, 0.0, 0.0),
            Vec3::new(0.0, 0.05, 0.0),
            Vec3::new(0.0, 0.0, 0.05),
        ];
        let t = Vec3::new(tx, ty, tz);
        let after: Vec<Vec3> = pts.iter().map(|p| q.rotate(*p) + t).collect();
        let (r, _) = rigid_fit(&pts, &after).unwrap();
        prop_assert!(r.to_matrix().det() > 0.999);
        prop_assert!(angular_distance(r, q) < 1e-4);
    }

    #[test]
    fn dataset_round_trip_is_lossless(
        episodes in 1usize..5,
        steps in 1usize..8,
        obs_dim in 1usize..6,
        act_dim in 1usize..4,
        seed in 0u64..1000,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = episodes * steps;
        let ds = Dataset {
            task: Task::Push,
            quality: Quality::Expert,
            steps_per_episode: steps,
            obs_dim,
            act_dim,
            episodes: (0..episodes)
                .map(|_| EpisodeMeta {
                    tag: BehaviorTag::Expert,
                    goal: [rng.gen_range(-1.0..1.0); 7],
                })
                .collect(),
            observations: (0..n * obs_dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
            actions: (0..n * act_dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(),
            rewards: (0..n).map(|_| rng.gen_range(0.001f32..1.0)).collect(),
        };
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = Dataset::read_from(&mut &buf[..]).unwrap();
        prop_assert_eq!(ds, back);
    }
}
