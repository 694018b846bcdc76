//! Generalized Benes switching network: construction, quasi-linear
//! programming via graph 2-coloring, and plaintext evaluation.
//!
//! The network for N inputs has 2*ceil(log2 N) - 1 columns of 2x2 switch
//! gates. Arbitrary N is handled by recursively splitting into sub-networks
//! of floor(N/2) and ceil(N/2) wires until a 2-wire or 3-wire base block is
//! reached; odd-sized blocks route their last wire to the lower sub-network
//! on both sides. Plaintext evaluation serves as the correctness oracle for
//! the oblivious evaluation in the osn module.

use crate::perm::Permutation;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BenesError {
    #[error("network needs at least 2 inputs, got {0}")]
    TooSmall(usize),
    #[error("permutation length {perm} does not match network size {network}")]
    SizeMismatch { perm: usize, network: usize },
    #[error("input length {input} does not match network size {network}")]
    InputLengthMismatch { input: usize, network: usize },
    #[error("coloring conflict at vertex {vertex} (bipartiteness violated)")]
    ColoringConflict { vertex: usize },
}

/// A 2x2 switch gate on wires `j0 < j1` of one column, stored at `row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gate {
    pub j0: usize,
    pub j1: usize,
    pub row: usize,
}

/// Returns (columns, rows) of the switch array: (2*ceil(log2 N) - 1, N/2).
pub fn gate_dims(n_inputs: usize) -> Result<(usize, usize), BenesError> {
    if n_inputs < 2 {
        return Err(BenesError::TooSmall(n_inputs));
    }
    let k = usize::BITS as usize - (n_inputs - 1).leading_zeros() as usize; // ceil(log2)
    Ok((2 * k - 1, n_inputs / 2))
}

/// The public, hardwired structure of a generalized Benes network.
///
/// `conn[b][j]` gives the wire of column b-1 whose output feeds input j of
/// column b; positions without a gate in a column pass their value through.
#[derive(Clone, Debug)]
pub struct Topology {
    n: usize,
    cols: usize,
    rows: usize,
    conn: Vec<Vec<u32>>,
    gates: Vec<Vec<Gate>>,
    used_count: usize,
}

impl Topology {
    pub fn n_inputs(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Gates of one column, ordered by row (equivalently by top wire).
    pub fn gates_in_col(&self, col: usize) -> &[Gate] {
        &self.gates[col]
    }

    /// Total number of gates that exist in the generalized topology.
    pub fn used_gate_count(&self) -> usize {
        self.used_count
    }

    /// Source wire in column `col - 1` feeding input `j` of column `col`.
    pub fn conn(&self, col: usize, j: usize) -> usize {
        self.conn[col][j] as usize
    }

    /// Iterates all gates in canonical (column-major, row) order.
    pub fn iter_gates(&self) -> impl Iterator<Item = (usize, Gate)> + '_ {
        self.gates
            .iter()
            .enumerate()
            .flat_map(|(c, gs)| gs.iter().map(move |&g| (c, g)))
    }
}

/// Builds the deterministic public structure for `n_inputs` wires.
pub fn build_topology(n_inputs: usize) -> Result<Topology, BenesError> {
    let (cols, rows) = gate_dims(n_inputs)?;
    let mut topo = Topology {
        n: n_inputs,
        cols,
        rows,
        conn: (0..cols).map(|_| (0..n_inputs as u32).collect()).collect(),
        gates: vec![Vec::new(); cols],
        used_count: 0,
    };
    build_region(&mut topo, 0, cols - 1, 0, n_inputs);
    Ok(topo)
}

fn add_gate(topo: &mut Topology, col: usize, j0: usize, j1: usize) {
    let row = topo.gates[col].len();
    debug_assert!(row < topo.rows.max(1));
    topo.gates[col].push(Gate { j0, j1, row });
    topo.used_count += 1;
}

fn build_region(topo: &mut Topology, c0: usize, c1: usize, w0: usize, sz: usize) {
    let center = (c0 + c1) / 2;
    match sz {
        2 => {
            add_gate(topo, center, w0, w0 + 1);
            return;
        }
        3 => {
            // Three-gate block: (0,1), (1,2), (0,1) realizes all of S_3.
            add_gate(topo, center - 1, w0, w0 + 1);
            add_gate(topo, center, w0 + 1, w0 + 2);
            add_gate(topo, center + 1, w0, w0 + 1);
            return;
        }
        _ => {}
    }
    let n1 = sz / 2;
    for i in 0..n1 {
        add_gate(topo, c0, w0 + 2 * i, w0 + 2 * i + 1);
        add_gate(topo, c1, w0 + 2 * i, w0 + 2 * i + 1);
        // Even outputs of the input layer feed the upper sub-network,
        // odd outputs the lower one; mirrored on the output side.
        topo.conn[c0 + 1][w0 + i] = (w0 + 2 * i) as u32;
        topo.conn[c0 + 1][w0 + n1 + i] = (w0 + 2 * i + 1) as u32;
        topo.conn[c1][w0 + 2 * i] = (w0 + i) as u32;
        topo.conn[c1][w0 + 2 * i + 1] = (w0 + n1 + i) as u32;
    }
    // An odd last wire is hardwired into the lower sub-network on both sides.
    build_region(topo, c0 + 1, c1 - 1, w0, n1);
    build_region(topo, c0 + 1, c1 - 1, w0 + n1, sz - n1);
}

/// Gate settings for one programmed network: bit true = crossover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchProgram {
    pub n_inputs: usize,
    pub cols: usize,
    pub rows: usize,
    bits: Vec<bool>,
    used: Vec<bool>,
}

impl SwitchProgram {
    fn blank(topo: &Topology) -> SwitchProgram {
        let mut prog = SwitchProgram {
            n_inputs: topo.n,
            cols: topo.cols,
            rows: topo.rows,
            bits: vec![false; topo.cols * topo.rows.max(1)],
            used: vec![false; topo.cols * topo.rows.max(1)],
        };
        for (col, gate) in topo.iter_gates() {
            prog.used[col * prog.rows.max(1) + gate.row] = true;
        }
        prog
    }

    fn idx(&self, col: usize, row: usize) -> usize {
        col * self.rows.max(1) + row
    }

    pub fn bit(&self, col: usize, row: usize) -> bool {
        self.bits[self.idx(col, row)]
    }

    pub fn is_used(&self, col: usize, row: usize) -> bool {
        self.used[self.idx(col, row)]
    }

    fn set_bit(&mut self, col: usize, row: usize, v: bool) {
        let i = self.idx(col, row);
        debug_assert!(self.used[i]);
        self.bits[i] = v;
    }

    /// Choice bits in canonical gate order (column-major, then row).
    pub fn choice_bits(&self, topo: &Topology) -> Vec<bool> {
        topo.iter_gates()
            .map(|(col, g)| self.bit(col, g.row))
            .collect()
    }

    /// Diagnostic grid: one line per column, '0'/'1' per gate, '.' = unused.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for col in 0..self.cols {
            for row in 0..self.rows.max(1) {
                out.push(if !self.is_used(col, row) {
                    '.'
                } else if self.bit(col, row) {
                    '1'
                } else {
                    '0'
                });
            }
            out.push('\n');
        }
        out
    }
}

/// Work counters from one programming run.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProgramStats {
    /// Elementary steps: vertices painted, edges checked, gates set.
    pub steps: u64,
    /// Recursive looping invocations (including base blocks).
    pub looping_calls: u64,
}

/// Programs the network so that `eval_plain(prog, x)[i] == x[perm[i]]`.
pub fn program(topo: &Topology, perm: &Permutation) -> Result<SwitchProgram, BenesError> {
    program_instrumented(topo, perm).map(|(p, _)| p)
}

/// As [`program`], also returning work counters.
pub fn program_instrumented(
    topo: &Topology,
    perm: &Permutation,
) -> Result<(SwitchProgram, ProgramStats), BenesError> {
    if perm.len() != topo.n {
        return Err(BenesError::SizeMismatch {
            perm: perm.len(),
            network: topo.n,
        });
    }
    let mut prog = SwitchProgram::blank(topo);
    let mut stats = ProgramStats::default();
    let sigma: Vec<usize> = perm.as_slice().to_vec();
    program_region(topo, &mut prog, &mut stats, 0, topo.cols - 1, 0, &sigma)?;
    Ok((prog, stats))
}

fn row_of(topo: &Topology, col: usize, j0: usize) -> usize {
    // Gates in a column are sorted by top wire; binary search suffices.
    let gs = &topo.gates[col];
    let i = gs.partition_point(|g| g.j0 < j0);
    debug_assert!(i < gs.len() && gs[i].j0 == j0);
    gs[i].row
}

fn program_region(
    topo: &Topology,
    prog: &mut SwitchProgram,
    stats: &mut ProgramStats,
    c0: usize,
    c1: usize,
    w0: usize,
    sigma: &[usize],
) -> Result<(), BenesError> {
    stats.looping_calls += 1;
    let sz = sigma.len();
    let center = (c0 + c1) / 2;
    match sz {
        2 => {
            stats.steps += 1;
            prog.set_bit(center, row_of(topo, center, w0), sigma[0] != 0);
            return Ok(());
        }
        3 => {
            // Exhaustive search over the 2^3 settings of the base block.
            for setting in 0..8u8 {
                let bits = [setting & 1 != 0, setting & 2 != 0, setting & 4 != 0];
                let mut tau = [0usize, 1, 2];
                // Gate order along the wires: (0,1), (1,2), (0,1); the
                // realized mapping is out[i] = in[t1(t2(t3(i)))].
                if bits[0] {
                    tau.swap(0, 1); // innermost applied last below
                }
                let tau1 = tau;
                let mut tau = [0usize, 1, 2];
                if bits[1] {
                    tau.swap(1, 2);
                }
                let tau2 = tau;
                let mut tau = [0usize, 1, 2];
                if bits[2] {
                    tau.swap(0, 1);
                }
                let tau3 = tau;
                let composed: Vec<usize> = (0..3).map(|i| tau1[tau2[tau3[i]]]).collect();
                stats.steps += 1;
                if composed == sigma {
                    prog.set_bit(center - 1, row_of(topo, center - 1, w0), bits[0]);
                    prog.set_bit(center, row_of(topo, center, w0 + 1), bits[1]);
                    prog.set_bit(center + 1, row_of(topo, center + 1, w0), bits[2]);
                    return Ok(());
                }
            }
            unreachable!("3-block exhausts S_3");
        }
        _ => {}
    }

    let n1 = sz / 2;
    let n2 = sz - n1;
    let odd = sz % 2 == 1;

    // 2-color the constraint graph: input duals {2i,2i+1} and output duals
    // {sigma(2i),sigma(2i+1)} must split across the two sub-networks.
    let mut inv_sigma = vec![0usize; sz];
    for (i, &v) in sigma.iter().enumerate() {
        inv_sigma[v] = i;
    }
    let mut color = vec![-1i8; sz];
    let mut stack: Vec<(usize, i8)> = Vec::new();
    let mut seeds: Vec<(usize, i8)> = Vec::new();
    if odd {
        // The unpaired wire is hardwired to the lower sub-network at both
        // the input and output layer.
        seeds.push((sz - 1, 1));
        seeds.push((sigma[sz - 1], 1));
    }
    let mut next_unseeded = 0usize;
    loop {
        let seed = if let Some(s) = seeds.pop() {
            s
        } else {
            while next_unseeded < sz && color[next_unseeded] != -1 {
                next_unseeded += 1;
            }
            if next_unseeded == sz {
                break;
            }
            (next_unseeded, 0)
        };
        if color[seed.0] != -1 {
            if color[seed.0] != seed.1 {
                return Err(BenesError::ColoringConflict { vertex: seed.0 });
            }
            continue;
        }
        stack.push(seed);
        while let Some((v, c)) = stack.pop() {
            stats.steps += 1;
            if color[v] != -1 {
                if color[v] != c {
                    return Err(BenesError::ColoringConflict { vertex: v });
                }
                continue;
            }
            color[v] = c;
            // Input-side dual.
            if !(odd && v == sz - 1) {
                let d = v ^ 1;
                if color[d] == -1 {
                    stack.push((d, 1 - c));
                } else if color[d] == c {
                    return Err(BenesError::ColoringConflict { vertex: d });
                }
            }
            // Output-side dual: partner of v within its output gate.
            let w = inv_sigma[v];
            if !(odd && w == sz - 1) {
                let d = sigma[w ^ 1];
                if color[d] == -1 {
                    stack.push((d, 1 - c));
                } else if color[d] == c {
                    return Err(BenesError::ColoringConflict { vertex: d });
                }
            }
        }
    }

    // Input layer: crossover iff wire 2i is routed to the lower sub-network.
    // Color 0 exits on the even wire (upper), color 1 on the odd (lower).
    let mut sub_src_up = vec![0usize; n1]; // wire carried at upper input position i
    let mut sub_src_lo = vec![0usize; n2];
    for i in 0..n1 {
        stats.steps += 1;
        let cross = color[2 * i] == 1;
        prog.set_bit(c0, row_of(topo, c0, w0 + 2 * i), cross);
        sub_src_up[i] = 2 * i + cross as usize;
        sub_src_lo[i] = 2 * i + !cross as usize;
    }
    if odd {
        sub_src_lo[n2 - 1] = sz - 1;
    }

    // Output layer: out wire 2i must receive in[sigma(2i)]; it arrives from
    // the upper sub-network iff that vertex is colored 0.
    let mut dest_up = vec![0usize; n1];
    let mut dest_lo = vec![0usize; n2];
    for i in 0..n1 {
        stats.steps += 1;
        let cross = color[sigma[2 * i]] == 1;
        prog.set_bit(c1, row_of(topo, c1, w0 + 2 * i), cross);
        if cross {
            dest_up[i] = sigma[2 * i + 1];
            dest_lo[i] = sigma[2 * i];
        } else {
            dest_up[i] = sigma[2 * i];
            dest_lo[i] = sigma[2 * i + 1];
        }
    }
    if odd {
        dest_lo[n2 - 1] = sigma[sz - 1];
    }

    // Position of wire w inside its sub-network is its pair index.
    let sigma_up: Vec<usize> = dest_up.iter().map(|&w| w / 2).collect();
    let sigma_lo: Vec<usize> = dest_lo.iter().map(|&w| w / 2).collect();
    debug_assert!(sub_src_up.iter().enumerate().all(|(i, &w)| w / 2 == i));
    debug_assert!(sub_src_lo.iter().enumerate().all(|(i, &w)| w / 2 == i));

    program_region(topo, prog, stats, c0 + 1, c1 - 1, w0, &sigma_up)?;
    program_region(topo, prog, stats, c0 + 1, c1 - 1, w0 + n1, &sigma_lo)?;
    Ok(())
}

/// Plaintext routing: output[i] = input[perm(i)] for the programmed perm.
pub fn eval_plain<T: Clone>(
    topo: &Topology,
    prog: &SwitchProgram,
    input: &[T],
) -> Result<Vec<T>, BenesError> {
    if input.len() != topo.n {
        return Err(BenesError::InputLengthMismatch {
            input: input.len(),
            network: topo.n,
        });
    }
    let mut vals: Vec<T> = input.to_vec();
    let mut scratch: Vec<T> = input.to_vec();
    for col in 0..topo.cols {
        if col > 0 {
            for j in 0..topo.n {
                scratch[j] = vals[topo.conn(col, j)].clone();
            }
            std::mem::swap(&mut vals, &mut scratch);
        }
        for g in topo.gates_in_col(col) {
            if prog.bit(col, g.row) {
                vals.swap(g.j0, g.j1);
            }
        }
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::RandomSource;
    use crate::perm::random_permutation;

    fn check_network(n: usize, perm: &Permutation) {
        let topo = build_topology(n).unwrap();
        let prog = program(&topo, perm).unwrap();
        let input: Vec<usize> = (0..n).collect();
        let out = eval_plain(&topo, &prog, &input).unwrap();
        for i in 0..n {
            assert_eq!(out[i], perm.apply(i), "n={n} position {i}");
        }
    }

    #[test]
    fn gate_dims_examples() {
        assert_eq!(gate_dims(2).unwrap(), (1, 1));
        assert_eq!(gate_dims(8).unwrap(), (5, 4));
        assert_eq!(gate_dims(9).unwrap(), (7, 4));
        assert!(gate_dims(1).is_err());
    }

    #[test]
    fn topology_small_shapes() {
        let t2 = build_topology(2).unwrap();
        assert_eq!(t2.cols(), 1);
        assert_eq!(t2.used_gate_count(), 1);

        // N=8: classic fully-populated 5x4 structure.
        let t8 = build_topology(8).unwrap();
        assert_eq!((t8.cols(), t8.rows()), (5, 4));
        assert_eq!(t8.used_gate_count(), 20);

        // N=9: 7 columns with a 3-wire block in the middle; not fully used.
        let t9 = build_topology(9).unwrap();
        assert_eq!((t9.cols(), t9.rows()), (7, 4));
        assert!(t9.used_gate_count() < 7 * 4);
    }

    #[test]
    fn two_input_gate_bits() {
        let topo = build_topology(2).unwrap();
        let swap = Permutation::from_map(vec![1, 0]).unwrap();
        let prog = program(&topo, &swap).unwrap();
        assert!(prog.bit(0, 0));
        let prog = program(&topo, &Permutation::identity(2)).unwrap();
        assert!(!prog.bit(0, 0));
    }

    #[test]
    fn swap_routes_values() {
        let topo = build_topology(2).unwrap();
        let prog = program(&topo, &Permutation::from_map(vec![1, 0]).unwrap()).unwrap();
        let out = eval_plain(&topo, &prog, &["a", "b"]).unwrap();
        assert_eq!(out, ["b", "a"]);
    }

    #[test]
    fn all_sizes_2_to_64_exhaustive_random() {
        let mut rng = RandomSource::from_seed([21u8; 32]);
        for n in 2..=64 {
            check_network(n, &Permutation::identity(n));
            for _ in 0..20 {
                let p = random_permutation(n, &mut rng).unwrap();
                check_network(n, &p);
            }
        }
    }

    #[test]
    fn random_sizes_up_to_512() {
        let mut rng = RandomSource::from_seed([22u8; 32]);
        for _ in 0..200 {
            let n = 2 + rng.index(511);
            let p = random_permutation(n, &mut rng).unwrap();
            check_network(n, &p);
        }
    }

    #[test]
    fn eval_plain_rejects_bad_length() {
        let topo = build_topology(4).unwrap();
        let prog = program(&topo, &Permutation::identity(4)).unwrap();
        assert!(matches!(
            eval_plain(&topo, &prog, &[1, 2, 3]),
            Err(BenesError::InputLengthMismatch { .. })
        ));
    }

    #[test]
    fn program_rejects_size_mismatch() {
        let topo = build_topology(4).unwrap();
        assert!(matches!(
            program(&topo, &Permutation::identity(5)),
            Err(BenesError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn dump_grid_shape() {
        let topo = build_topology(9).unwrap();
        let prog = program(&topo, &Permutation::identity(9)).unwrap();
        let dump = prog.dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines.iter().all(|l| l.len() == 4));
        assert!(dump.contains('.'));
    }

    #[test]
    fn quasi_linear_work_bound() {
        // steps <= C * N * ceil(log2 N) for a fixed C across sizes.
        let mut rng = RandomSource::from_seed([23u8; 32]);
        for k in 4..=12 {
            let n = 1usize << k;
            let topo = build_topology(n).unwrap();
            let p = random_permutation(n, &mut rng).unwrap();
            let (_, stats) = program_instrumented(&topo, &p).unwrap();
            let bound = 8 * (n as u64) * (k as u64);
            assert!(
                stats.steps <= bound,
                "n={n}: {} steps > bound {bound}",
                stats.steps
            );
        }
    }

    /// Components of the coloring graph for a full-size permutation: for even
    /// n only even cycles; for odd n exactly one chain or isolated node.
    #[test]
    fn coloring_graph_cycle_structure() {
        let mut rng = RandomSource::from_seed([24u8; 32]);
        for &n in &[16usize, 17, 64, 65, 128, 129] {
            let p = random_permutation(n, &mut rng).unwrap();
            let sigma = p.as_slice();
            let mut inv = vec![0usize; n];
            for (i, &v) in sigma.iter().enumerate() {
                inv[v] = i;
            }
            let odd = n % 2 == 1;
            let neighbors = |v: usize| -> Vec<usize> {
                let mut out = Vec::new();
                if !(odd && v == n - 1) {
                    out.push(v ^ 1);
                }
                let w = inv[v];
                if !(odd && w == n - 1) {
                    out.push(sigma[w ^ 1]);
                }
                out
            };
            let mut seen = vec![false; n];
            let mut chains = 0usize;
            let mut nodes = 0usize;
            for start in 0..n {
                if seen[start] {
                    continue;
                }
                let mut comp = Vec::new();
                let mut stack = vec![start];
                let mut degree_sum = 0usize;
                while let Some(v) = stack.pop() {
                    if seen[v] {
                        continue;
                    }
                    seen[v] = true;
                    comp.push(v);
                    let ns = neighbors(v);
                    degree_sum += ns.iter().filter(|&&u| u != v).count();
                    for u in ns {
                        if !seen[u] {
                            stack.push(u);
                        }
                    }
                }
                let edges = degree_sum / 2;
                if comp.len() == 1 && edges == 0 {
                    nodes += 1;
                } else if edges == comp.len() {
                    assert_eq!(comp.len() % 2, 0, "odd cycle in n={n}");
                } else {
                    assert_eq!(edges, comp.len() - 1, "component neither cycle nor chain");
                    chains += 1;
                }
            }
            if odd {
                assert_eq!(chains + nodes, 1, "n={n}");
            } else {
                assert_eq!(chains + nodes, 0, "n={n}");
            }
        }
    }
}
