// Map helpers that run on rayon with the `parallel` feature and serially
// without it. Every caller collects into an ordered Vec and reduces
// sequentially, so output never depends on scheduling.

macro_rules! par_map_range {
    ($range:expr, $f:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::{IntoParallelIterator, ParallelIterator};
            ($range).into_par_iter().map($f).collect::<Vec<_>>()
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($range).into_iter().map($f).collect::<Vec<_>>()
        }
    }};
}

macro_rules! par_map_slice {
    ($slice:expr, $f:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::{IntoParallelRefIterator, ParallelIterator};
            ($slice).par_iter().map($f).collect::<Vec<_>>()
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($slice).iter().map($f).collect::<Vec<_>>()
        }
    }};
}

macro_rules! par_chunks_mut_for_each {
    ($slice:expr, $size:expr, $f:expr) => {{
        #[cfg(feature = "parallel")]
        {
            use rayon::iter::{IndexedParallelIterator, ParallelIterator};
            use rayon::slice::ParallelSliceMut;
            ($slice).par_chunks_mut($size).enumerate().for_each($f);
        }
        #[cfg(not(feature = "parallel"))]
        {
            ($slice).chunks_mut($size).enumerate().for_each($f);
        }
    }};
}
