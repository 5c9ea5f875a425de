//! Jacobi 2-D kernel: 5-point stencil sweeps over an f32 grid with
//! ping-pong buffers. Interior accesses are element-strided because stencil
//! neighbours sit one element off the vector alignment.

use super::{
    align_up, data_directives, f32_bytes, parse_kernel, rand_f32_unit, KernelCase, KernelError,
};
use crate::config::ValidatedConfig;

const COEFF_BITS: u32 = 0x3E4C_CCCD; // 0.2f32

/// Scalar reference, matching the kernel's f32 association order exactly:
/// ((((center + up) + down) + left) + right) * 0.2.
pub fn golden_jacobi2d(n: usize, steps: usize, grid: &[f32]) -> Vec<f32> {
    let coeff = f32::from_bits(COEFF_BITS);
    let mut a = grid.to_vec();
    let mut b = grid.to_vec();
    for s in 0..steps {
        let (src, dst) = if s % 2 == 0 {
            (&a, &mut b)
        } else {
            (&b, &mut a)
        };
        for r in 1..n - 1 {
            for c in 1..n - 1 {
                let sum = (((src[r * n + c] + src[(r - 1) * n + c]) + src[(r + 1) * n + c])
                    + src[r * n + c - 1])
                    + src[r * n + c + 1];
                dst[r * n + c] = sum * coeff;
            }
        }
    }
    if steps % 2 == 0 {
        a
    } else {
        b
    }
}

pub fn build_jacobi2d(
    cfg: &ValidatedConfig,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<KernelCase, KernelError> {
    let mut s = seed;
    let grid: Vec<f32> = (0..n * n).map(|_| rand_f32_unit(&mut s)).collect();
    build_jacobi2d_with(cfg, n, steps, grid)
}

pub fn build_jacobi2d_with(
    cfg: &ValidatedConfig,
    n: usize,
    steps: usize,
    grid: Vec<f32>,
) -> Result<KernelCase, KernelError> {
    if n < 3 {
        return Err(KernelError::BadDims(format!(
            "jacobi2d size {n} must be at least 3"
        )));
    }
    let epv = cfg.elems_per_vec();
    if (n * n) % epv != 0 {
        return Err(KernelError::BadDims(format!(
            "jacobi2d grid {n}x{n} must be a multiple of {epv} elements for the copy pass"
        )));
    }
    assert_eq!(grid.len(), n * n);

    let a_base = 0x1000;
    let b_base = align_up(a_base + n * n * 4, 256);

    let mut src = String::new();
    src.push_str("# jacobi2d: 5-point stencil, ping-pong buffers\n");
    src.push_str(&data_directives(a_base, &f32_bytes(&grid)));
    src.push_str(&format!(
        "\
li s1, {a_base}
li s2, {b_base}
li t0, {total}
li t1, 0
addi t3, s1, 0
addi t4, s2, 0
copy_loop:
sub t5, t0, t1
vsetvli t2, t5, e32
vle32.v v1, (t3)
vse32.v v1, (t4)
slli t5, t2, 2
add t3, t3, t5
add t4, t4, t5
add t1, t1, t2
blt t1, t0, copy_loop
li t0, {total}
vsetvli x0, t0, e32
li t1, {coeff}
vmv.v.x v7, t1
li a7, 4
li s3, 0
li t0, {steps}
bge s3, t0, done
step_loop:
li s4, 1
row_loop:
li t0, {row_bytes}
mul t1, s4, t0
add t2, s1, t1
add t3, s2, t1
li s5, 1
col_loop:
li t0, {interior_end}
sub t0, t0, s5
vsetvli t4, t0, e32
slli t5, s5, 2
add a2, t2, t5
addi a3, a2, -{row_bytes}
addi a4, a2, {row_bytes}
addi a5, a2, -4
addi a6, a2, 4
vlse32.v v1, (a2), a7
vlse32.v v2, (a3), a7
vlse32.v v3, (a4), a7
vlse32.v v4, (a5), a7
vlse32.v v5, (a6), a7
vfadd.vv v6, v1, v2
vfadd.vv v6, v6, v3
vfadd.vv v6, v6, v4
vfadd.vv v6, v6, v5
vfmul.vv v6, v6, v7
add a2, t3, t5
vsse32.v v6, (a2), a7
add s5, s5, t4
li t0, {interior_end}
blt s5, t0, col_loop
addi s4, s4, 1
li t0, {interior_end}
blt s4, t0, row_loop
addi t0, s1, 0
addi s1, s2, 0
addi s2, t0, 0
addi s3, s3, 1
li t0, {steps}
blt s3, t0, step_loop
done:
halt
",
        total = n * n,
        coeff = COEFF_BITS,
        row_bytes = n * 4,
        interior_end = n - 1,
    ));

    let golden = f32_bytes(&golden_jacobi2d(n, steps, &grid));
    let output_addr = if steps % 2 == 0 { a_base } else { b_base };
    let program = parse_kernel("jacobi2d", &src);
    Ok(KernelCase {
        name: "jacobi2d".to_string(),
        source: src,
        program,
        golden,
        output_addr,
        problem_size: format!("{n}x{n}, {steps} steps"),
        expected_active_registers: 5..=9,
    })
}
