use mifs_core::importance::{mi_importance, MiConfig};
use mifs_core::multiobjective::{accuracy_csv, parse_accuracy_csv, task_distortion, SelectionKey};
use mifs_core::selection_codec::{soft_select, CompressedPayload, Keep, SelectionPlan};
use mifs_core::synth_bench::{generate, SynthSpec};
use mifs_core::tensor_store::{decode, encode, RawTensor};
use mifs_core::{Dataset, FeatureTensor};
use proptest::prelude::*;

#[test]
fn synth_on_disk_ranks_like_in_memory() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        samples: 40,
        ..SynthSpec::default()
    };
    generate(&spec, dir.path()).unwrap();
    let ds = Dataset::open(&dir.path().join("manifest.json")).unwrap();
    let mem = mifs_core::synth_bench::dataset(&spec).unwrap();
    assert_eq!(ds.features, mem.features);
    let cfg = MiConfig::default();
    assert_eq!(mi_importance(&ds, 1, &cfg).unwrap(), mi_importance(&mem, 1, &cfg).unwrap());
}

#[test]
fn soft_payload_survives_the_file_boundary() {
    let spec = SynthSpec {
        samples: 3,
        ..SynthSpec::default()
    };
    let ds = mifs_core::synth_bench::dataset(&spec).unwrap();
    let ordering: Vec<u32> = (0..32).collect();
    let plan = SelectionPlan::soft(ordering, Keep::Fraction(0.75), 22);
    let dir = tempfile::tempdir().unwrap();
    for (i, t) in ds.features.iter().enumerate() {
        let p = soft_select(t, &plan).unwrap();
        let path = dir.path().join(format!("{i}.fsel"));
        std::fs::write(&path, p.to_bytes()).unwrap();
        let back = CompressedPayload::from_bytes(&std::fs::read(&path).unwrap()).unwrap();
        assert_eq!(back.reconstruct().unwrap(), p.reconstruct().unwrap());
    }
}

#[test]
fn hand_written_accuracy_table() {
    let text = "task_id,metric,direction,criterion,keep_count,qp,accuracy\n\
                0,mIoU,higher-better,full,,,0.5\n\
                0,mIoU,higher-better,mi,128,,0.45\n\
                0,mIoU,higher-better,mi,128,30,0.49\n\
                1,RMSE,lower-better,full,,,8\n\
                1,RMSE,lower-better,mi,128,,10\n\
                1,RMSE,lower-better,mi,128,30,8.4\n";
    let records = parse_accuracy_csv(text).unwrap();
    assert_eq!(records.len(), 2);
    let d = |r, key| task_distortion(&records[r], "mi", key).unwrap();
    assert!((d(0, SelectionKey::hard(128)) - 0.1).abs() < 1e-12);
    assert!((d(1, SelectionKey::hard(128)) - 0.25).abs() < 1e-12);
    assert!((d(1, SelectionKey::soft(128, 30)) - 0.05).abs() < 1e-12);
    let again = parse_accuracy_csv(&accuracy_csv(&records).unwrap()).unwrap();
    assert_eq!(again, records);
}

proptest! {
    #[test]
    fn ften_roundtrip_is_bit_exact(
        dims in prop::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        let n: usize = dims.iter().product();
        let mut s = mifs_core::rng::Stream::new(seed);
        let values: Vec<f32> = (0..n).map(|_| (s.normal() * 1e3) as f32).collect();
        let t = RawTensor::f32(dims, values);
        let bytes = encode(&t).unwrap();
        prop_assert_eq!(&bytes[..4], b"FTEN");
        prop_assert_eq!(decode(&bytes).unwrap(), t);
    }

    #[test]
    fn fsel_roundtrip(keep in 1usize..=6, qp in 0u8..=51, seed in any::<u64>()) {
        let mut s = mifs_core::rng::Stream::new(seed);
        let values: Vec<f32> = (0..6 * 9 * 11).map(|_| s.normal() as f32).collect();
        let t = FeatureTensor::new(6, 9, 11, values).unwrap();
        let plan = SelectionPlan::soft(vec![4, 0, 5, 2, 1, 3], Keep::Count(keep), qp);
        let p = soft_select(&t, &plan).unwrap();
        let back = CompressedPayload::from_bytes(&p.to_bytes()).unwrap();
        prop_assert_eq!(&back, &p);
        let sizes = p.sizes();
        prop_assert_eq!(sizes.total_bytes, p.to_bytes().len());
    }
}
