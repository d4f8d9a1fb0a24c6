//! Bytecode assembly and disassembly for the reference machine.
//!
//! The instruction set is sixteen 4-bit opcodes, MSB-first; six of them carry
//! one gamma-coded operand, which must be at least 1 (gamma has no code for
//! zero — a backward jump of 0 or a counter set to 0 is expressed by program
//! structure instead).
//!
//! | code | mnemonic  | effect |
//! |------|-----------|--------|
//! | 0000 | HALT      | stop, accept output |
//! | 0001 | OUT0      | append 0 to output |
//! | 0010 | OUT1      | append 1 to output |
//! | 0011 | READOUT   | read one input bit, append it to output |
//! | 0100 | READWORK  | read one input bit, write it under the head |
//! | 0101 | W0        | write 0 under the head |
//! | 0110 | W1        | write 1 under the head |
//! | 0111 | LEFT      | move head left (stays put at cell 0) |
//! | 1000 | RIGHT     | move head right |
//! | 1001 | OUTW      | append the cell under the head to output |
//! | 1010 | SETCTR n  | counter := n |
//! | 1011 | DECJNZB d | if counter>0: decrement, and if still >0 jump back d |
//! | 1100 | JZF d     | if cell is 0, jump forward d |
//! | 1101 | JZB d     | if cell is 0, jump back d |
//! | 1110 | JMPB d    | jump back d |
//! | 1111 | ESCAPE j  | invoke host builtin j, then halt |
//!
//! Jump distances are in bits, measured from the bit position immediately
//! after the operand. There is deliberately no unconditional forward jump:
//! `W0; JZF d` emulates one at the cost of clobbering the current cell.

use crate::encodings::{gamma, gamma_decode, gamma_len};
use crate::BitString;

/// One machine instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instr {
    Halt,
    Out0,
    Out1,
    ReadOut,
    ReadWork,
    W0,
    W1,
    Left,
    Right,
    OutW,
    SetCtr(u64),
    DecJnzB(u64),
    JzF(u64),
    JzB(u64),
    JmpB(u64),
    Escape(u64),
}

impl Instr {
    /// The 4-bit opcode.
    pub fn opcode(self) -> u8 {
        match self {
            Instr::Halt => 0,
            Instr::Out0 => 1,
            Instr::Out1 => 2,
            Instr::ReadOut => 3,
            Instr::ReadWork => 4,
            Instr::W0 => 5,
            Instr::W1 => 6,
            Instr::Left => 7,
            Instr::Right => 8,
            Instr::OutW => 9,
            Instr::SetCtr(_) => 10,
            Instr::DecJnzB(_) => 11,
            Instr::JzF(_) => 12,
            Instr::JzB(_) => 13,
            Instr::JmpB(_) => 14,
            Instr::Escape(_) => 15,
        }
    }

    /// The operand, for the six instructions that carry one.
    pub fn operand(self) -> Option<u64> {
        match self {
            Instr::SetCtr(n)
            | Instr::DecJnzB(n)
            | Instr::JzF(n)
            | Instr::JzB(n)
            | Instr::JmpB(n)
            | Instr::Escape(n) => Some(n),
            _ => None,
        }
    }

    /// Encoded width in bits: 4 for the opcode plus the operand's gamma code.
    pub fn width(self) -> usize {
        4 + self.operand().map_or(0, |n| gamma_len(n as u128))
    }
}

impl std::fmt::Display for Instr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Instr::Halt => write!(f, "HALT"),
            Instr::Out0 => write!(f, "OUT0"),
            Instr::Out1 => write!(f, "OUT1"),
            Instr::ReadOut => write!(f, "READOUT"),
            Instr::ReadWork => write!(f, "READWORK"),
            Instr::W0 => write!(f, "W0"),
            Instr::W1 => write!(f, "W1"),
            Instr::Left => write!(f, "LEFT"),
            Instr::Right => write!(f, "RIGHT"),
            Instr::OutW => write!(f, "OUTW"),
            Instr::SetCtr(n) => write!(f, "SETCTR {n}"),
            Instr::DecJnzB(n) => write!(f, "DECJNZB {n}"),
            Instr::JzF(n) => write!(f, "JZF {n}"),
            Instr::JzB(n) => write!(f, "JZB {n}"),
            Instr::JmpB(n) => write!(f, "JMPB {n}"),
            Instr::Escape(n) => write!(f, "ESCAPE {n}"),
        }
    }
}

/// Errors from assembling an instruction list.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    /// Operands are gamma-coded and therefore start at 1.
    #[error("instruction {index} ({mnemonic}) has operand 0, which gamma cannot code")]
    OperandOutOfRange { index: usize, mnemonic: String },
}

/// Assembles instructions into bytecode bits (no length header).
pub fn assemble(instrs: &[Instr]) -> Result<BitString, AsmError> {
    let mut out = BitString::new();
    for (index, &ins) in instrs.iter().enumerate() {
        if ins.operand() == Some(0) {
            return Err(AsmError::OperandOutOfRange { index, mnemonic: ins.to_string() });
        }
        let op = ins.opcode();
        for shift in (0..4).rev() {
            out.push((op >> shift) & 1);
        }
        if let Some(n) = ins.operand() {
            out.extend(&gamma(n as u128));
        }
    }
    Ok(out)
}

/// Assembles and prepends the gamma-coded bytecode length, producing a
/// complete program head ready to be followed by data bits.
pub fn assemble_program(instrs: &[Instr]) -> Result<BitString, AsmError> {
    let body = assemble(instrs)?;
    let mut out = gamma(body.len() as u128);
    out.extend(&body);
    Ok(out)
}

/// The result of walking bytecode from the front: the instructions that
/// parse cleanly, plus any trailing bits that do not form an instruction
/// (a truncated opcode or an operand running off the end).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Disassembly {
    pub instrs: Vec<Instr>,
    pub trailing: Option<BitString>,
}

/// Disassembles bytecode bits (no length header).
pub fn disassemble(code: &BitString) -> Disassembly {
    let mut instrs = Vec::new();
    let mut pos = 0;
    while pos + 4 <= code.len() {
        let mut op = 0u8;
        for i in 0..4 {
            op = op << 1 | code.bit(pos + i);
        }
        let ins = if op < 10 {
            let ins = match op {
                0 => Instr::Halt,
                1 => Instr::Out0,
                2 => Instr::Out1,
                3 => Instr::ReadOut,
                4 => Instr::ReadWork,
                5 => Instr::W0,
                6 => Instr::W1,
                7 => Instr::Left,
                8 => Instr::Right,
                _ => Instr::OutW,
            };
            pos += 4;
            ins
        } else {
            let (value, width) = match gamma_decode(code, pos + 4) {
                Ok(pair) => pair,
                Err(_) => break,
            };
            if value > u64::MAX as u128 {
                break;
            }
            let n = value as u64;
            let ins = match op {
                10 => Instr::SetCtr(n),
                11 => Instr::DecJnzB(n),
                12 => Instr::JzF(n),
                13 => Instr::JzB(n),
                14 => Instr::JmpB(n),
                _ => Instr::Escape(n),
            };
            pos += 4 + width;
            ins
        };
        instrs.push(ins);
    }
    let trailing = if pos < code.len() {
        let mut rest = BitString::new();
        for i in pos..code.len() {
            rest.push(code.bit(i));
        }
        Some(rest)
    } else {
        None
    };
    Disassembly { instrs, trailing }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_instruction_encodings() {
        assert_eq!(assemble(&[Instr::Halt]).unwrap().to_string(), "0000");
        assert_eq!(assemble(&[Instr::SetCtr(3)]).unwrap().to_string(), "1010011");
        assert_eq!(assemble(&[Instr::Escape(2)]).unwrap().to_string(), "1111010");
        assert_eq!(assemble_program(&[Instr::Halt]).unwrap().to_string(), "001000000");
    }

    #[test]
    fn copy_three_bytecode_layout() {
        // SETCTR 3; READOUT; DECJNZB 15; HALT — the backward distance 15 is
        // the fixed point d = 8 + |γ(d)| that re-executes READOUT.
        let code = assemble(&[
            Instr::SetCtr(3),
            Instr::ReadOut,
            Instr::DecJnzB(15),
            Instr::Halt,
        ])
        .unwrap();
        assert_eq!(code.len(), 26);
        assert_eq!(code.to_string(), "10100110011101100011110000");
    }

    #[test]
    fn operand_zero_rejected() {
        let err = assemble(&[Instr::Out0, Instr::JmpB(0)]).unwrap_err();
        assert_eq!(
            err,
            AsmError::OperandOutOfRange { index: 1, mnemonic: "JMPB 0".to_string() }
        );
    }

    #[test]
    fn disassembly_round_trip_random_programs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let len = rng.gen_range(1..=12);
            let instrs: Vec<Instr> = (0..len)
                .map(|_| {
                    let op: u8 = rng.gen_range(0..16);
                    let n: u64 = rng.gen_range(1..=300);
                    match op {
                        0 => Instr::Halt,
                        1 => Instr::Out0,
                        2 => Instr::Out1,
                        3 => Instr::ReadOut,
                        4 => Instr::ReadWork,
                        5 => Instr::W0,
                        6 => Instr::W1,
                        7 => Instr::Left,
                        8 => Instr::Right,
                        9 => Instr::OutW,
                        10 => Instr::SetCtr(n),
                        11 => Instr::DecJnzB(n),
                        12 => Instr::JzF(n),
                        13 => Instr::JzB(n),
                        14 => Instr::JmpB(n),
                        _ => Instr::Escape(n),
                    }
                })
                .collect();
            let code = assemble(&instrs).unwrap();
            let dis = disassemble(&code);
            assert_eq!(dis.instrs, instrs);
            assert_eq!(dis.trailing, None);
        }
    }

    #[test]
    fn truncated_tail_reported() {
        let mut code = assemble(&[Instr::Out1]).unwrap();
        code.push(1);
        code.push(0);
        let dis = disassemble(&code);
        assert_eq!(dis.instrs, vec![Instr::Out1]);
        assert_eq!(dis.trailing.unwrap().to_string(), "10");

        // An operand gamma running off the end is trailing too.
        let mut code = assemble(&[Instr::ReadOut]).unwrap();
        for b in [1, 0, 1, 0, 0, 0] {
            code.push(b);
        }
        let dis = disassemble(&code);
        assert_eq!(dis.instrs, vec![Instr::ReadOut]);
        assert_eq!(dis.trailing.unwrap().to_string(), "101000");
    }
}
