//! Commissioning: pulling master keys through the OTP ports once and
//! distributing them.

use super::card::{DoctorCard, PatientCard};
use super::has::Has;
use super::imd::Imd;
use super::ProtocolError;
use crate::crypto::{MacKey3, IV_BYTES};
use crate::pok::PokContainer;

/// Material the hospital chooses for a new patient.
#[derive(Debug)]
pub struct PatientRegistration {
    pub key2: Vec<u8>,
    pub iv: [u8; IV_BYTES],
    pub profile: String,
}

/// Extracts `Key1` from the card's OTP port (fusing it), loads `Key1`,
/// `Key2` and the IV into the implant at cycle 1, and records `Key2` and
/// the IV at the server. Any earlier server record for the patient is
/// replaced.
pub fn enroll_patient(
    has: &mut Has,
    imd: &mut Imd,
    card: &mut PatientCard,
    reg: &PatientRegistration,
) -> Result<(), ProtocolError> {
    let key1 = card
        .chip_mut()
        .otp_extract()
        .map_err(|e| ProtocolError::EnrollmentFailure(format!("patient card: {e}")))?;
    let key2_chip = PokContainer::provision(&reg.key2)
        .map_err(|e| ProtocolError::EnrollmentFailure(format!("Key2: {e}")))?;
    imd.provision(&key1, &reg.key2, reg.iv)?;
    has.register_patient(imd.id_i(), key2_chip, reg.iv, &reg.profile);
    card.bind(imd.id_i(), reg.iv);
    Ok(())
}

/// Extracts `Key3` from the doctor card's OTP port and registers the
/// doctor with the server.
pub fn enroll_doctor(
    has: &mut Has,
    card: &mut DoctorCard,
    password: &str,
    profile: &str,
) -> Result<(), ProtocolError> {
    let raw = card
        .chip_mut()
        .otp_extract()
        .map_err(|e| ProtocolError::EnrollmentFailure(format!("doctor card: {e}")))?;
    let key3 = MacKey3::from_slice(&raw)
        .ok_or_else(|| ProtocolError::EnrollmentFailure("Key3 must be 16 bytes".into()))?;
    has.register_doctor(card.id_p(), key3, password, profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ImdConfig;

    fn parts() -> (Has, Imd, PatientCard, PatientRegistration) {
        (
            Has::new(5000),
            Imd::new(ImdConfig {
                id_i: 5,
                ts_window_ms: 5000,
                cache_size: 4,
            }),
            PatientCard::blank(PokContainer::provision(&[0x11; 10]).unwrap(), 4),
            PatientRegistration {
                key2: vec![0x22; 10],
                iv: [0x33; 10],
                profile: "p".into(),
            },
        )
    }

    #[test]
    fn all_parties_share_key_material() {
        let (mut has, mut imd, mut card, reg) = parts();
        enroll_patient(&mut has, &mut imd, &mut card, &reg).unwrap();
        let (ga, gb) = imd.generators().unwrap();
        assert_eq!(
            card.generator().unwrap().derive_key(1).unwrap().bytes,
            ga.derive_key(1).unwrap().bytes
        );
        assert_eq!(
            has.patient(5).unwrap().gen_b.derive_key(1).unwrap().bytes,
            gb.derive_key(1).unwrap().bytes
        );
        assert_eq!(imd.cycle(), 1);
        assert_eq!(card.cycle(), Some(1));
        assert_eq!(has.cycle(5), Some(1));
    }

    #[test]
    fn same_card_cannot_enroll_twice() {
        let (mut has, mut imd, mut card, reg) = parts();
        enroll_patient(&mut has, &mut imd, &mut card, &reg).unwrap();
        let mut imd2 = Imd::new(ImdConfig {
            id_i: 6,
            ts_window_ms: 5000,
            cache_size: 4,
        });
        assert!(matches!(
            enroll_patient(&mut has, &mut imd2, &mut card, &reg),
            Err(ProtocolError::EnrollmentFailure(_))
        ));
        assert!(has.patient(6).is_none());
    }

    #[test]
    fn doctor_enrollment_is_one_shot() {
        let mut has = Has::new(5000);
        let mut card = DoctorCard::new(7, PokContainer::provision(&[9; 16]).unwrap());
        enroll_doctor(&mut has, &mut card, "pw", "chief").unwrap();
        assert!(card.umac(b"x").is_ok());
        assert!(matches!(
            enroll_doctor(&mut has, &mut card, "pw", "chief"),
            Err(ProtocolError::EnrollmentFailure(_))
        ));
        let mut clone = DoctorCard::new(7, PokContainer::provision(&[8; 16]).unwrap());
        assert!(matches!(
            enroll_doctor(&mut has, &mut clone, "pw", "chief"),
            Err(ProtocolError::EnrollmentFailure(_))
        ));
    }
}
