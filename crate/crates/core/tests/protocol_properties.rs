use pokimd::crypto::Digest256;
use pokimd::protocol::*;
use pokimd::simnet::{World, WorldConfig, CHIEF_ID, PATIENT_ID};
use proptest::prelude::*;

fn challenge(world: &mut World, r: u32, now: u64) -> ImdChallenge {
    match world
        .imd
        .handle_request(&ServiceRequest { r, id_p: CHIEF_ID }, now)
        .unwrap()
    {
        ProtocolMessage::ImdChallenge(c) => c,
        other => panic!("unexpected {other:?}"),
    }
}

fn shares(world: &World, c: &ImdChallenge, r: u32) -> (Digest256, Digest256) {
    let sa = world.card.generator().unwrap().derive_key(c.i).unwrap();
    let sb = world
        .has
        .patient(PATIENT_ID)
        .unwrap()
        .gen_b
        .derive_key(c.i)
        .unwrap();
    (
        card_share(&sa, c.t1, r),
        has_share(&sb, c.t1, CHIEF_ID, PATIENT_ID, r),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Either share zeroed, or replaced by garbage, never opens the implant;
    /// both shares together always do.
    #[test]
    fn no_acceptance_without_both_shares(seed in any::<u64>(), junk in any::<[u8; 32]>(), t in 1u64..1_000_000) {
        let mut world = World::enrolled(WorldConfig::default(), seed).unwrap();
        for which in 0..4 {
            let c = challenge(&mut world, REQUEST_READ, t);
            let (a, b) = shares(&world, &c, REQUEST_READ);
            let (a, b) = match which {
                0 => (Digest256::ZERO, b),
                1 => (a, Digest256::ZERO),
                2 => (Digest256(junk), b),
                _ => (a, Digest256(junk)),
            };
            let proof = token_proof(c.t1, &assemble_token(&a, &b));
            prop_assert_eq!(
                world.imd.verify_token(&TokenSubmit { proof }, t + 1),
                Err(ProtocolError::Rejected(RejectReason::BadProof))
            );
            prop_assert_eq!(world.imd.cycle(), 1);
        }
        let c = challenge(&mut world, REQUEST_READ, t);
        let (a, b) = shares(&world, &c, REQUEST_READ);
        let proof = token_proof(c.t1, &assemble_token(&a, &b));
        prop_assert_eq!(world.imd.verify_token(&TokenSubmit { proof }, t + 1), Ok(session_key(&a, &b)));
        prop_assert_eq!(world.imd.cycle(), 2);
    }

    /// A share computed for another request code does not pass either.
    #[test]
    fn shares_are_bound_to_the_request(seed in any::<u64>()) {
        let mut world = World::enrolled(WorldConfig::default(), seed).unwrap();
        let c = challenge(&mut world, REQUEST_REPROGRAM, 10);
        let (a, b) = shares(&world, &c, REQUEST_READ);
        let proof = token_proof(c.t1, &assemble_token(&a, &b));
        let verdict = world.imd.verify_token(&TokenSubmit { proof }, 11);
        prop_assert!(verdict.is_err());
    }
}

#[test]
fn late_token_times_out() {
    let mut world = World::enrolled(WorldConfig::default(), 3).unwrap();
    let c = challenge(&mut world, REQUEST_READ, 1000);
    let (a, b) = shares(&world, &c, REQUEST_READ);
    let proof = token_proof(c.t1, &assemble_token(&a, &b));
    let late = 1000 + DEFAULT_TS_MS as u64 + 1;
    assert_eq!(
        world.imd.verify_token(&TokenSubmit { proof }, late),
        Err(ProtocolError::Rejected(RejectReason::Timeout))
    );
    assert_eq!(world.imd.cycle(), 1);
}

#[test]
fn refill_rejects_more_than_capacity() {
    let mut world = World::enrolled(WorldConfig::default(), 5).unwrap();
    let cap = world.card.max_cache();
    assert!(matches!(
        world.has.refill_cache(&mut world.card, cap + 1),
        Err(ProtocolError::InvalidParameter(_))
    ));
}
