use memlearn::trace::{
    generate, load_trace, read_any_trace, read_trace, save_any_trace, write_trace, AccessKind,
    GeneratorKind, MemoryAccess, RequestKind, StorageRequest, Trace, TraceSpec,
};
use proptest::prelude::*;

fn accesses() -> impl Strategy<Value = Vec<MemoryAccess>> {
    prop::collection::vec(
        (any::<u64>(), any::<u64>(), 0u64..1000, any::<bool>()),
        0..200,
    )
    .prop_map(|raw| {
        let mut cycle = 0;
        raw.into_iter()
            .map(|(pc, vaddr, step, store)| {
                cycle += step;
                MemoryAccess {
                    pc,
                    vaddr,
                    cycle,
                    kind: if store {
                        AccessKind::Store
                    } else {
                        AccessKind::Load
                    },
                }
            })
            .collect()
    })
}

fn requests() -> impl Strategy<Value = Vec<StorageRequest>> {
    prop::collection::vec(
        (any::<u64>(), 1u32..512, 0u64..10_000, any::<bool>()),
        0..200,
    )
    .prop_map(|raw| {
        let mut ts = 0;
        raw.into_iter()
            .map(|(page, size, step, write)| {
                ts += step;
                StorageRequest {
                    page_id: page / 2,
                    size_pages: size,
                    kind: if write {
                        RequestKind::Write
                    } else {
                        RequestKind::Read
                    },
                    timestamp: ts,
                }
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn memory_traces_round_trip(events in accesses()) {
        let mut buf = vec![];
        write_trace(&events, &mut buf).unwrap();
        let back: Vec<MemoryAccess> = read_trace(buf.as_slice()).unwrap();
        prop_assert_eq!(back, events);
    }

    #[test]
    fn storage_traces_round_trip(events in requests()) {
        let mut buf = vec![];
        write_trace(&events, &mut buf).unwrap();
        let back: Vec<StorageRequest> = read_trace(buf.as_slice()).unwrap();
        prop_assert_eq!(back, events);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), len in 1usize..500) {
        for g in [GeneratorKind::Stride, GeneratorKind::MixedPcStride, GeneratorKind::Random,
                  GeneratorKind::HotCold, GeneratorKind::SequentialBurst] {
            let spec = TraceSpec::new(g, len, seed);
            prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
    }
}

#[test]
fn files_round_trip_by_header() {
    let dir = tempfile::tempdir().unwrap();
    for spec in [
        TraceSpec::new(GeneratorKind::MixedPcStride, 300, 1),
        TraceSpec::new(GeneratorKind::HotCold, 300, 2),
    ] {
        let trace = generate(&spec).unwrap();
        let path = dir.path().join("t.trace");
        save_any_trace(&trace, &path).unwrap();
        assert_eq!(read_any_trace(&path).unwrap(), trace);
    }
}

#[test]
fn loading_the_wrong_kind_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.trace");
    let trace = generate(&TraceSpec::new(GeneratorKind::HotCold, 10, 3)).unwrap();
    save_any_trace(&trace, &path).unwrap();
    assert!(matches!(trace, Trace::Storage(_)));
    assert!(load_trace::<MemoryAccess>(&path).is_err());
}
