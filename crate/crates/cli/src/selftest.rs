//! Built-in checks that need nothing but the binary.

use std::path::Path;

use nclink::codec::{
    encode_block, AckSignal, CodecParams, CodingBlock, DistinctSeeds, EmissionKind,
};
use nclink::framing::{datagram, decapsulate, encapsulate, golden, NcHeader};
use nclink::gf256::{add, inv, mul};
use nclink::pipeline::threaded::run_loopback;
use nclink::pipeline::DecoderWorker;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = (String, Result<(), String>);

/// Prints one line per check and returns whether all passed. The output
/// has no timings so two runs print the same bytes.
pub fn run(fixtures: Option<&Path>) -> bool {
    let mut checks: Vec<Check> = vec![
        ("field: commutativity and identities".into(), field_basics()),
        (
            "field: associativity (all triples)".into(),
            field_triples(|a, b, c| mul(mul(a, b), c) == mul(a, mul(b, c))),
        ),
        (
            "field: distributivity (all triples)".into(),
            field_triples(|a, b, c| mul(a, add(b, c)) == add(mul(a, b), mul(a, c))),
        ),
        ("field: inverses".into(), field_inverses()),
        (
            "codec: 300 lossy round trips".into(),
            codec_round_trips(300),
        ),
        ("pipeline: threaded loopback".into(), loopback()),
    ];
    let results = match fixtures {
        Some(dir) => golden::verify_dir(dir),
        None => golden::verify_embedded(),
    };
    checks.extend(
        results
            .into_iter()
            .map(|(name, r)| (format!("fixture: {name}"), r)),
    );

    let width = checks.iter().map(|c| c.0.len()).max().unwrap_or(0);
    let mut ok = true;
    for (name, r) in &checks {
        match r {
            Ok(()) => println!("{name:<width$}  PASS"),
            Err(e) => {
                ok = false;
                println!("{name:<width$}  FAIL  {e}");
            }
        }
    }
    let failed = checks.iter().filter(|c| c.1.is_err()).count();
    println!("{} checks, {failed} failed", checks.len());
    ok
}

fn field_basics() -> Result<(), String> {
    for a in 0..=255u8 {
        if mul(a, 1) != a || mul(a, 0) != 0 || add(a, 0) != a || add(a, a) != 0 {
            return Err(format!("identity fails at {a}"));
        }
        for b in 0..=255u8 {
            if mul(a, b) != mul(b, a) {
                return Err(format!("{a}*{b} not commutative"));
            }
        }
    }
    Ok(())
}

fn field_triples(law: impl Fn(u8, u8, u8) -> bool) -> Result<(), String> {
    for a in 0..=255u8 {
        for b in 0..=255u8 {
            for c in 0..=255u8 {
                if !law(a, b, c) {
                    return Err(format!("fails at ({a}, {b}, {c})"));
                }
            }
        }
    }
    Ok(())
}

fn field_inverses() -> Result<(), String> {
    if inv(0).is_ok() {
        return Err("0 has an inverse".into());
    }
    for a in 1..=255u8 {
        match inv(a) {
            Ok(i) if mul(a, i) == 1 => {}
            other => return Err(format!("inv({a}) = {other:?}")),
        }
    }
    Ok(())
}

/// Random lists through encoder, wire and decoder worker, erasing systematic
/// packets with probability 0.3 and coded ones with 0.1.
fn codec_round_trips(n: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5E1F);
    for t in 0..n {
        let packets: Vec<Vec<u8>> = (0..rng.random_range(1..=10u32))
            .map(|i| datagram::build(i, rng.random_range(datagram::MIN_LEN..=1400)))
            .collect();
        let params = CodecParams {
            preferred_segments: rng.random_range(4..=64),
            redundancy_rounds: 1,
            redundancy_per_round: 64,
            ..CodecParams::default()
        };
        let block =
            CodingBlock::new(0, 0, &packets, &params).map_err(|e| format!("trial {t}: {e}"))?;
        let ns = block.segment_count();
        let mut w = DecoderWorker::new(0);
        let mut delivered = Vec::new();
        for e in encode_block(
            block,
            &params,
            &mut DistinctSeeds::new(t as u64),
            AckSignal::new(),
        ) {
            let p = if matches!(e.kind, EmissionKind::Systematic { .. }) {
                0.3
            } else {
                0.1
            };
            if rng.random_bool(p) {
                continue;
            }
            let h = NcHeader::for_emission(0, 0, ns, &e).map_err(|e| e.to_string())?;
            let wire = encapsulate(&h, &e.payload).map_err(|e| e.to_string())?;
            let (h, seg) = decapsulate(&wire).map_err(|e| e.to_string())?;
            delivered.extend(w.ingest(&h, seg).delivered);
        }
        if delivered != packets {
            return Err(format!(
                "trial {t}: Ns={ns}, {} of {} packets back",
                delivered.len(),
                packets.len()
            ));
        }
    }
    Ok(())
}

fn loopback() -> Result<(), String> {
    let packets: Vec<Vec<u8>> = (0..300)
        .map(|i| datagram::build(i, 100 + (i as usize * 53) % 1300))
        .collect();
    let mut n = 0u32;
    let report = run_loopback(
        packets.clone(),
        &CodecParams::default().with_redundancy(40),
        2,
        1,
        move |_| {
            n += 1;
            n.is_multiple_of(6)
        },
    );
    let mut got = report.delivered;
    got.sort();
    let mut want = packets;
    want.sort();
    if got == want {
        Ok(())
    } else {
        Err(format!("{} of {} packets delivered", got.len(), want.len()))
    }
}
