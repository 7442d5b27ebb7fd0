use ndarray::Array2;
use qdml::dataset::{FeatureMode, Group, Sample};
use qdml::ensemble::EnsembleForecast;
use qdml::hyperopt::Trial;
use qdml::tdvp::{DensityRow, Trajectory};
use qdml::io::*;
use qdml::hyperopt::HyperPoint;

fn sample_trajectory() -> Trajectory {
    let mut t = Trajectory::default();
    for k in 0..7 {
        let x = k as f64 * 0.5;
        t.push(
            x,
            DensityRow {
                rho11: (x * 0.3).cos().powi(2),
                rho22: (x * 0.3).sin().powi(2),
                re_rho12: 1.0 / 3.0 + x * 1e-17,
                im_rho12: -f64::MIN_POSITIVE * k as f64,
            },
        );
    }
    t
}

#[test]
fn trajectory_round_trip_is_exact() {
    let t = sample_trajectory();
    let mut buf = Vec::new();
    write_trajectory_to(&mut buf, &t).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t_fs,rho11,rho22,re_rho12,im_rho12\n"));
    assert_eq!(read_trajectory_from(buf.as_slice()).unwrap(), t);
}

#[test]
fn wrong_header_is_rejected() {
    let text = "t,rho11,rho22,re_rho12,im_rho12\n0,1,0,0,0\n";
    assert!(read_trajectory_from(text.as_bytes()).is_err());
}

#[test]
fn forecast_round_trip() {
    for mode in [FeatureMode::Full, FeatureMode::Population] {
        let d = mode.dim();
        let f = EnsembleForecast {
            mode,
            times: vec![350.5, 351.0, 351.5],
            mean: Array2::from_shape_fn((3, d), |(i, j)| (i * 7 + j) as f64 / 9.0),
            std: Array2::from_shape_fn((3, d), |(i, j)| (i + j) as f64 * 1e-3 / 7.0),
            n_members: 30,
        };
        let mut buf = Vec::new();
        write_forecast_to(&mut buf, &f).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap().lines().next().unwrap().to_string();
        if mode == FeatureMode::Population {
            assert_eq!(header, "t_fs,mean_delta,std_delta,n_members");
        } else {
            assert_eq!(header, "t_fs,mean_delta,std_delta,mean_re12,std_re12,mean_im12,std_im12,n_members");
        }
        assert_eq!(read_forecast_from(buf.as_slice()).unwrap(), f);
    }
}

#[test]
fn slices_round_trip() {
    let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
    let tagged = vec![
        (Group::A2, Sample { start: 0, len: 4 }),
        (Group::A1, Sample { start: 1, len: 4 }),
        (Group::B, Sample { start: 15, len: 4 }),
    ];
    let mut buf = Vec::new();
    write_slices_to(&mut buf, &tagged, &times).unwrap();
    assert_eq!(read_slices_from(buf.as_slice()).unwrap(), tagged);
    assert!(write_slices_to(Vec::new(), &[(Group::B, Sample { start: 17, len: 4 })], &times).is_err());
}

#[test]
fn trials_round_trip() {
    let trials = vec![
        Trial {
            task: 0,
            iter: 0,
            x: HyperPoint {
                layers: 2,
                neurons: vec![10, 50],
                memory_time: 12.5,
            },
            loss: 0.1 + 0.2,
            wall_ms: 12,
            checkpoint_path: Some("checkpoints/task0.json".into()),
        },
        Trial {
            task: 0,
            iter: 1,
            x: HyperPoint {
                layers: 3,
                neurons: vec![10, 30, 510],
                memory_time: 5.0,
            },
            loss: f64::INFINITY,
            wall_ms: 3,
            checkpoint_path: None,
        },
    ];
    let mut buf = Vec::new();
    write_trials_to(&mut buf, &trials).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
    assert_eq!(read_trials_from(buf.as_slice()).unwrap(), trials);
}
