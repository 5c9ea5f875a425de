//! Dropout kernel: masked scale-and-copy. Keep bits are precomputed in
//! mask-register layout, one vector-width block per strip, loaded straight
//! into v0 and applied through the `, v0.t` suffix.

use super::{
    align_up, data_directives, i32_bytes, parse_kernel, splitmix64, KernelCase, KernelError,
};
use crate::config::ValidatedConfig;

/// Scalar reference: out[i] = keep[i] ? in[i]*scale : 0, wrapping.
pub fn golden_dropout(input: &[i32], keep: &[bool], scale: i32) -> Vec<i32> {
    input
        .iter()
        .zip(keep)
        .map(|(v, k)| if *k { v.wrapping_mul(scale) } else { 0 })
        .collect()
}

pub fn build_dropout(
    cfg: &ValidatedConfig,
    len: usize,
    scale: i32,
    seed: u64,
) -> Result<KernelCase, KernelError> {
    let mut s = seed;
    let input: Vec<i32> = (0..len).map(|_| super::rand_i32_small(&mut s)).collect();
    let keep: Vec<bool> = (0..len).map(|_| splitmix64(&mut s) & 1 == 1).collect();
    build_dropout_with(cfg, len, scale, input, keep)
}

pub fn build_dropout_with(
    cfg: &ValidatedConfig,
    len: usize,
    scale: i32,
    input: Vec<i32>,
    keep: Vec<bool>,
) -> Result<KernelCase, KernelError> {
    let epv = cfg.elems_per_vec();
    if len == 0 || len % epv != 0 {
        return Err(KernelError::BadDims(format!(
            "dropout length {len} must be a positive multiple of {epv}"
        )));
    }
    assert_eq!(input.len(), len);
    assert_eq!(keep.len(), len);
    let vb = cfg.vlen_bytes();

    // One vector-width block of mask bits per strip: bit j of the block
    // masks element j of that strip.
    let mut mask_bytes = Vec::with_capacity(len / epv * vb);
    for chunk in keep.chunks(epv) {
        let mut block = vec![0u8; vb];
        for (j, k) in chunk.iter().enumerate() {
            if *k {
                block[j / 8] |= 1 << (j % 8);
            }
        }
        mask_bytes.extend(block);
    }

    let in_base = 0x1000;
    let mask_base = align_up(in_base + len * 4, 256);
    let out_base = align_up(mask_base + mask_bytes.len(), 256);

    let mut src = String::new();
    src.push_str("# dropout: out[i] = keep(i) ? in[i]*scale : 0\n");
    src.push_str(&data_directives(in_base, &i32_bytes(&input)));
    src.push_str(&data_directives(mask_base, &mask_bytes));
    src.push_str(&format!(
        "\
li a0, {in_base}
li a1, {mask_base}
li a2, {out_base}
li a3, {len}
li t1, {scale}
vsetvli t2, a3, e32
vmv.v.x v3, t1
li t0, 0
loop:
vle32.v v0, (a1)
vle32.v v1, (a0)
vmv.v.x v2, x0
vmul.vv v2, v1, v3, v0.t
vse32.v v2, (a2)
slli t3, t2, 2
add a0, a0, t3
add a2, a2, t3
addi a1, a1, {vb}
add t0, t0, t2
blt t0, a3, loop
halt
",
    ));

    let golden = i32_bytes(&golden_dropout(&input, &keep, scale));
    let program = parse_kernel("dropout", &src);
    Ok(KernelCase {
        name: "dropout".to_string(),
        source: src,
        program,
        golden,
        output_addr: out_base,
        problem_size: format!("len {len}, scale {scale}"),
        expected_active_registers: 1..=5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::analyze_registers;
    use crate::config::MachineConfig;
    use crate::pipeline::run;

    fn cfg() -> ValidatedConfig {
        MachineConfig::default().validate().unwrap()
    }

    #[test]
    fn all_ones_mask_is_pure_scaling() {
        let cfg = cfg();
        let input: Vec<i32> = (0..32).map(|i| i - 16).collect();
        let k = build_dropout_with(&cfg, 32, 3, input.clone(), vec![true; 32]).unwrap();
        let out = run(&k.program, &cfg, &[], 1_000_000).unwrap();
        let expect: Vec<i32> = input.iter().map(|v| v * 3).collect();
        assert_eq!(k.output_of(&out.memory), i32_bytes(&expect).as_slice());
    }

    #[test]
    fn all_zeros_mask_leaves_the_zeroed_destination() {
        let cfg = cfg();
        let input: Vec<i32> = (0..32).map(|i| i + 1).collect();
        let k = build_dropout_with(&cfg, 32, 3, input, vec![false; 32]).unwrap();
        let out = run(&k.program, &cfg, &[], 1_000_000).unwrap();
        assert!(k.output_of(&out.memory).iter().all(|b| *b == 0));
    }

    #[test]
    fn random_mask_matches_the_elementwise_select() {
        let cfg = cfg();
        let k = build_dropout(&cfg, 4096, 3, 11).unwrap();
        let out = run(&k.program, &cfg, &[], 10_000_000).unwrap();
        assert_eq!(k.output_of(&out.memory), k.golden.as_slice());
    }

    #[test]
    fn register_budget_is_on_target() {
        let cfg = cfg();
        let k = build_dropout(&cfg, 4096, 3, 11).unwrap();
        let r = analyze_registers(&k.program);
        // v0 (explicit mask load), v1, v2, v3.
        assert_eq!(r.active_registers, 4);
        assert!(k.expected_active_registers.contains(&r.active_registers));
    }

    #[test]
    fn bad_length_is_rejected() {
        let cfg = cfg();
        assert!(matches!(
            build_dropout(&cfg, 33, 2, 1),
            Err(KernelError::BadDims(_))
        ));
    }
}
