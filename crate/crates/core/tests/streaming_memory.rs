use std::alloc::{GlobalAlloc, Layout, System};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use abacoc::ingest::{write_libsvm_line, LibsvmSource, Normalized};
use abacoc::metric::FeatureVector;

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let p = unsafe { System.alloc(layout) };
        if !p.is_null() {
            let now = LIVE.fetch_add(layout.size(), Ordering::Relaxed) + layout.size();
            PEAK.fetch_max(now, Ordering::Relaxed);
        }
        p
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        unsafe { System.dealloc(ptr, layout) };
        LIVE.fetch_sub(layout.size(), Ordering::Relaxed);
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

fn write_file(path: &Path, records: u64) {
    let mut w = BufWriter::new(File::create(path).unwrap());
    for i in 0..records {
        let pairs = (0..5)
            .map(|k| (k * 10 + i as usize % 10, 0.25 + k as f64))
            .collect();
        let x = FeatureVector::sparse(50, pairs).unwrap();
        write_libsvm_line(&mut w, if i % 3 == 0 { "+1" } else { "-1" }, &x).unwrap();
    }
    w.flush().unwrap();
}

/// Peak bytes allocated above the baseline while streaming the whole file.
fn streaming_peak(path: &Path, normalize: bool) -> (usize, u64) {
    let base = LIVE.load(Ordering::Relaxed);
    PEAK.store(base, Ordering::Relaxed);
    let source = LibsvmSource::open(path, 50).unwrap();
    let mut seen = 0u64;
    if normalize {
        for r in Normalized::new(source) {
            r.unwrap();
            seen += 1;
        }
    } else {
        for r in source {
            r.unwrap();
            seen += 1;
        }
    }
    (PEAK.load(Ordering::Relaxed) - base, seen)
}

// Single test: the allocator counters are process-wide.
#[test]
fn reader_memory_does_not_grow_with_file_length() {
    let dir = tempfile::tempdir().unwrap();
    let small = dir.path().join("small.libsvm");
    let large = dir.path().join("large.libsvm");
    write_file(&small, 1_000);
    write_file(&large, 1_000_000);

    for normalize in [false, true] {
        let (peak_small, n_small) = streaming_peak(&small, normalize);
        let (peak_large, n_large) = streaming_peak(&large, normalize);
        assert_eq!((n_small, n_large), (1_000, 1_000_000));
        let ratio = peak_large as f64 / peak_small as f64;
        assert!(
            ratio < 2.0,
            "normalize={normalize}: peak {peak_large} B for 1e6 records vs {peak_small} B for 1e3"
        );
    }
}
