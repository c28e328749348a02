//! Node-block parallelism over graph-ordered buffers.
//!
//! Work is split into contiguous blocks of nodes. Per-node buffers and
//! per-entry buffers are cut at the same block boundaries, so each task owns
//! disjoint mutable slices and the result never depends on the worker count.

use std::ops::Range;

use rayon::prelude::*;

use crate::mesh::DiscreteGraph;

/// Nodes per parallel task.
pub const BLOCK: usize = 1024;

/// Contiguous node ranges covering `0..n`.
pub fn node_blocks(n: usize) -> Vec<Range<usize>> {
    (0..n.div_ceil(BLOCK)).map(|b| b * BLOCK..((b + 1) * BLOCK).min(n)).collect()
}

/// Splits a per-node buffer with `stride` values per node along `blocks`.
pub fn split_nodes<'a, T>(data: &'a mut [T], blocks: &[Range<usize>], stride: usize) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(blocks.len());
    let mut rest = data;
    for r in blocks {
        let (head, tail) = rest.split_at_mut(r.len() * stride);
        out.push(head);
        rest = tail;
    }
    out
}

/// Splits a per-entry buffer with `stride` values per entry along `blocks`.
pub fn split_entries<'a, T>(
    data: &'a mut [T],
    graph: &DiscreteGraph,
    blocks: &[Range<usize>],
    stride: usize,
) -> Vec<&'a mut [T]> {
    let ptr = graph.row_ptr();
    let mut out = Vec::with_capacity(blocks.len());
    let mut rest = data;
    for r in blocks {
        let len = (ptr[r.end] - ptr[r.start]) * stride;
        let (head, tail) = rest.split_at_mut(len);
        out.push(head);
        rest = tail;
    }
    out
}

/// Runs `f` on every block with its own slice of one buffer.
pub fn for_each_block<T, F>(blocks: &[Range<usize>], parts: Vec<&mut [T]>, f: F)
where
    T: Send,
    F: Fn(Range<usize>, &mut [T]) + Sync + Send,
{
    blocks.par_iter().cloned().zip(parts.into_par_iter()).for_each(|(r, p)| f(r, p));
}

/// Runs `f` on every block with its own slices of two buffers.
pub fn for_each_block2<A, B, F>(blocks: &[Range<usize>], a: Vec<&mut [A]>, b: Vec<&mut [B]>, f: F)
where
    A: Send,
    B: Send,
    F: Fn(Range<usize>, &mut [A], &mut [B]) + Sync + Send,
{
    blocks
        .par_iter()
        .cloned()
        .zip(a.into_par_iter())
        .zip(b.into_par_iter())
        .for_each(|((r, a), b)| f(r, a, b));
}

/// Runs `f` on every block with its own slices of three buffers.
pub fn for_each_block3<A, B, C, F>(blocks: &[Range<usize>], a: Vec<&mut [A]>, b: Vec<&mut [B]>, c: Vec<&mut [C]>, f: F)
where
    A: Send,
    B: Send,
    C: Send,
    F: Fn(Range<usize>, &mut [A], &mut [B], &mut [C]) + Sync + Send,
{
    blocks
        .par_iter()
        .cloned()
        .zip(a.into_par_iter())
        .zip(b.into_par_iter())
        .zip(c.into_par_iter())
        .for_each(|(((r, a), b), c)| f(r, a, b, c));
}
