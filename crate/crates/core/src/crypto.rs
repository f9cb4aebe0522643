//! Participant keys, signatures and public-key encryption of shares.
//!
//! A participant's identifier is its public key material. Two schemes sit
//! behind the same interface:
//!
//! - [`Scheme::Ed25519`]: Ed25519 signatures plus an X25519 key for sealing
//!   shares (ephemeral-static ECDH, SHA-256 key derivation, ChaCha20-Poly1305).
//!   Both public keys live inside the identifier.
//! - [`Scheme::TestDouble`]: hash-based stand-ins with the same contracts
//!   (round trip, wrong-key rejection, randomized ciphertexts) and none of
//!   the security. It keeps large protocol sweeps fast.
//!
//! Identifier bytes: `scheme tag | key material`.

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use x25519_dalek::{PublicKey as XPublicKey, StaticSecret};

const TAG_ED25519: u8 = 0x01;
const TAG_TEST_DOUBLE: u8 = 0x02;

const ED_ID_LEN: usize = 1 + 32 + 32;
const DOUBLE_ID_LEN: usize = 1 + 32;

const ED_SIG_LEN: usize = 64;
const DOUBLE_SIG_LEN: usize = 32;

const ED_NONCE_LEN: usize = 12;
const ED_TAG_LEN: usize = 16;
const DOUBLE_NONCE_LEN: usize = 16;
const DOUBLE_MAC_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CryptoError {
    #[error("malformed participant id: {0}")]
    MalformedId(String),
    #[error("decryption failed")]
    DecryptionFailed,
    #[error("ciphertext addressed to a different participant")]
    WrongRecipient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Ed25519,
    TestDouble,
}

impl Scheme {
    /// Blob length produced by [`encrypt`] for a plaintext of `plaintext_len` bytes.
    pub fn ciphertext_len(self, plaintext_len: usize) -> usize {
        match self {
            Scheme::Ed25519 => 32 + ED_NONCE_LEN + plaintext_len + ED_TAG_LEN,
            Scheme::TestDouble => DOUBLE_NONCE_LEN + plaintext_len + DOUBLE_MAC_LEN,
        }
    }

    pub fn signature_len(self) -> usize {
        match self {
            Scheme::Ed25519 => ED_SIG_LEN,
            Scheme::TestDouble => DOUBLE_SIG_LEN,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ed25519 => "ed25519",
            Scheme::TestDouble => "test-double",
        })
    }
}

/// Canonical public-key encoding; doubles as the participant's identity.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParticipantId(Vec<u8>);

impl ParticipantId {
    /// Accepts only well-formed public keys.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        match bytes.first() {
            Some(&TAG_ED25519) => {
                if bytes.len() != ED_ID_LEN {
                    return Err(CryptoError::MalformedId(format!(
                        "ed25519 id must be {ED_ID_LEN} bytes"
                    )));
                }
                let vk: [u8; 32] = bytes[1..33].try_into().unwrap();
                VerifyingKey::from_bytes(&vk)
                    .map_err(|_| CryptoError::MalformedId("not a curve point".into()))?;
                Ok(Self(bytes.to_vec()))
            }
            Some(&TAG_TEST_DOUBLE) => {
                if bytes.len() != DOUBLE_ID_LEN {
                    return Err(CryptoError::MalformedId(format!(
                        "test-double id must be {DOUBLE_ID_LEN} bytes"
                    )));
                }
                Ok(Self(bytes.to_vec()))
            }
            Some(tag) => Err(CryptoError::MalformedId(format!("unknown scheme tag {tag:#04x}"))),
            None => Err(CryptoError::MalformedId("empty".into())),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn scheme(&self) -> Scheme {
        match self.0[0] {
            TAG_ED25519 => Scheme::Ed25519,
            _ => Scheme::TestDouble,
        }
    }

    /// Short hex prefix for logs.
    pub fn fingerprint(&self) -> String {
        hex::encode(&self.0[1..9])
    }

    fn key_material(&self) -> &[u8] {
        &self.0[1..]
    }
}

impl fmt::Debug for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParticipantId({}:{})", self.scheme(), self.fingerprint())
    }
}

#[allow(clippy::large_enum_variant)]
enum SecretKey {
    Ed25519 {
        signing: SigningKey,
        sealing: StaticSecret,
    },
    TestDouble([u8; 32]),
}

/// Identity plus private key. Deliberately neither `Clone` nor serializable.
pub struct KeyPair {
    id: ParticipantId,
    secret: SecretKey,
}

impl KeyPair {
    pub fn id(&self) -> &ParticipantId {
        &self.id
    }

    /// Raw private key bytes, exposed so tests can scan artifacts for leaks.
    pub fn secret_bytes(&self) -> Vec<u8> {
        match &self.secret {
            SecretKey::Ed25519 { signing, sealing } => {
                let mut out = signing.to_bytes().to_vec();
                out.extend_from_slice(&sealing.to_bytes());
                out
            }
            SecretKey::TestDouble(secret) => secret.to_vec(),
        }
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair").field("id", &self.id).finish_non_exhaustive()
    }
}

/// Opaque sealed bytes addressed to `recipient`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub recipient: ParticipantId,
    pub blob: Vec<u8>,
}

pub fn gen_keypair<R: RngCore + CryptoRng>(scheme: Scheme, rng: &mut R) -> KeyPair {
    match scheme {
        Scheme::Ed25519 => {
            let signing = SigningKey::generate(rng);
            let sealing = StaticSecret::random_from_rng(&mut *rng);
            let mut id = vec![TAG_ED25519];
            id.extend_from_slice(signing.verifying_key().as_bytes());
            id.extend_from_slice(XPublicKey::from(&sealing).as_bytes());
            KeyPair {
                id: ParticipantId(id),
                secret: SecretKey::Ed25519 { signing, sealing },
            }
        }
        Scheme::TestDouble => {
            let mut secret = [0u8; 32];
            rng.fill_bytes(&mut secret);
            let mut id = vec![TAG_TEST_DOUBLE];
            id.extend_from_slice(&double_public(&secret));
            KeyPair {
                id: ParticipantId(id),
                secret: SecretKey::TestDouble(secret),
            }
        }
    }
}

pub fn sign(message: &[u8], keypair: &KeyPair) -> Vec<u8> {
    match &keypair.secret {
        SecretKey::Ed25519 { signing, .. } => signing.sign(message).to_bytes().to_vec(),
        SecretKey::TestDouble(_) => double_mac(keypair.id.key_material(), message).to_vec(),
    }
}

/// Never panics; malformed signatures simply fail.
pub fn verify(message: &[u8], signature: &[u8], signer: &ParticipantId) -> bool {
    match signer.scheme() {
        Scheme::Ed25519 => {
            let Ok(sig) = <[u8; ED_SIG_LEN]>::try_from(signature) else {
                return false;
            };
            let vk: [u8; 32] = signer.key_material()[..32].try_into().unwrap();
            let Ok(vk) = VerifyingKey::from_bytes(&vk) else {
                return false;
            };
            vk.verify(message, &ed25519_dalek::Signature::from_bytes(&sig)).is_ok()
        }
        Scheme::TestDouble => {
            signature.len() == DOUBLE_SIG_LEN
                && signature == double_mac(signer.key_material(), message).as_slice()
        }
    }
}

pub fn encrypt<R: RngCore + CryptoRng>(
    plaintext: &[u8],
    recipient: &ParticipantId,
    rng: &mut R,
) -> Ciphertext {
    let blob = match recipient.scheme() {
        Scheme::Ed25519 => {
            let their: [u8; 32] = recipient.key_material()[32..64].try_into().unwrap();
            let ephemeral = StaticSecret::random_from_rng(&mut *rng);
            let ephemeral_pub = XPublicKey::from(&ephemeral);
            let shared = ephemeral.diffie_hellman(&XPublicKey::from(their));
            let cipher = sealing_cipher(shared.as_bytes(), ephemeral_pub.as_bytes(), &their);
            let mut nonce = [0u8; ED_NONCE_LEN];
            rng.fill_bytes(&mut nonce);
            let sealed = cipher
                .encrypt(
                    Nonce::from_slice(&nonce),
                    Payload {
                        msg: plaintext,
                        aad: recipient.as_bytes(),
                    },
                )
                .expect("in-memory AEAD encryption cannot fail");
            let mut blob = ephemeral_pub.as_bytes().to_vec();
            blob.extend_from_slice(&nonce);
            blob.extend_from_slice(&sealed);
            blob
        }
        Scheme::TestDouble => {
            let mut nonce = [0u8; DOUBLE_NONCE_LEN];
            rng.fill_bytes(&mut nonce);
            let body = double_keystream_xor(recipient.key_material(), &nonce, plaintext);
            let mac = double_seal_mac(recipient.key_material(), &nonce, &body);
            let mut blob = nonce.to_vec();
            blob.extend_from_slice(&body);
            blob.extend_from_slice(&mac);
            blob
        }
    };
    Ciphertext {
        recipient: recipient.clone(),
        blob,
    }
}

/// Authenticated: a wrong key or a modified blob is an error, never garbage.
pub fn decrypt(ciphertext: &Ciphertext, keypair: &KeyPair) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.recipient != keypair.id {
        return Err(CryptoError::WrongRecipient);
    }
    decrypt_blob(&ciphertext.blob, keypair)
}

fn decrypt_blob(blob: &[u8], keypair: &KeyPair) -> Result<Vec<u8>, CryptoError> {
    match &keypair.secret {
        SecretKey::Ed25519 { sealing, .. } => {
            if blob.len() < 32 + ED_NONCE_LEN + ED_TAG_LEN {
                return Err(CryptoError::DecryptionFailed);
            }
            let ephemeral: [u8; 32] = blob[..32].try_into().unwrap();
            let nonce = &blob[32..32 + ED_NONCE_LEN];
            let shared = sealing.diffie_hellman(&XPublicKey::from(ephemeral));
            let own = XPublicKey::from(sealing);
            let cipher = sealing_cipher(shared.as_bytes(), &ephemeral, own.as_bytes());
            cipher
                .decrypt(
                    Nonce::from_slice(nonce),
                    Payload {
                        msg: &blob[32 + ED_NONCE_LEN..],
                        aad: keypair.id.as_bytes(),
                    },
                )
                .map_err(|_| CryptoError::DecryptionFailed)
        }
        SecretKey::TestDouble(_) => {
            if blob.len() < DOUBLE_NONCE_LEN + DOUBLE_MAC_LEN {
                return Err(CryptoError::DecryptionFailed);
            }
            let (nonce, rest) = blob.split_at(DOUBLE_NONCE_LEN);
            let (body, mac) = rest.split_at(rest.len() - DOUBLE_MAC_LEN);
            let public = keypair.id.key_material();
            if double_seal_mac(public, nonce, body) != mac {
                return Err(CryptoError::DecryptionFailed);
            }
            Ok(double_keystream_xor(public, nonce, body))
        }
    }
}

fn sealing_cipher(shared: &[u8], ephemeral: &[u8; 32], recipient: &[u8; 32]) -> ChaCha20Poly1305 {
    let key = Sha256::new()
        .chain_update(b"referendum/share-seal/v1")
        .chain_update(shared)
        .chain_update(ephemeral)
        .chain_update(recipient)
        .finalize();
    ChaCha20Poly1305::new(&key)
}

fn double_public(secret: &[u8; 32]) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"test-double/public")
        .chain_update(secret)
        .finalize()
        .into()
}

fn double_mac(public: &[u8], message: &[u8]) -> [u8; 32] {
    Sha256::new()
        .chain_update(b"test-double/sign")
        .chain_update(public)
        .chain_update(message)
        .finalize()
        .into()
}

fn double_keystream_xor(public: &[u8], nonce: &[u8], data: &[u8]) -> Vec<u8> {
    data.chunks(32)
        .enumerate()
        .flat_map(|(block, chunk)| {
            let pad: [u8; 32] = Sha256::new()
                .chain_update(b"test-double/stream")
                .chain_update(public)
                .chain_update(nonce)
                .chain_update((block as u64).to_be_bytes())
                .finalize()
                .into();
            chunk.iter().zip(pad).map(|(b, k)| b ^ k).collect::<Vec<_>>()
        })
        .collect()
}

fn double_seal_mac(public: &[u8], nonce: &[u8], body: &[u8]) -> [u8; DOUBLE_MAC_LEN] {
    let digest = Sha256::new()
        .chain_update(b"test-double/seal")
        .chain_update(public)
        .chain_update(nonce)
        .chain_update(body)
        .finalize();
    digest[..DOUBLE_MAC_LEN].try_into().unwrap()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    const SCHEMES: [Scheme; 2] = [Scheme::Ed25519, Scheme::TestDouble];

    #[test]
    fn distinct_seeds_give_distinct_valid_ids() {
        for scheme in SCHEMES {
            let a = gen_keypair(scheme, &mut ChaCha20Rng::seed_from_u64(1));
            let b = gen_keypair(scheme, &mut ChaCha20Rng::seed_from_u64(2));
            assert_ne!(a.id(), b.id());
            assert_eq!(ParticipantId::from_bytes(a.id().as_bytes()).unwrap(), *a.id());
            assert_eq!(a.id().scheme(), scheme);
        }
    }

    #[test]
    fn hundred_draws_are_distinct() {
        for scheme in SCHEMES {
            let mut rng = ChaCha20Rng::seed_from_u64(3);
            let ids: BTreeSet<_> = (0..100).map(|_| gen_keypair(scheme, &mut rng).id).collect();
            assert_eq!(ids.len(), 100);
        }
    }

    #[test]
    fn malformed_ids_are_rejected() {
        assert!(ParticipantId::from_bytes(&[]).is_err());
        assert!(ParticipantId::from_bytes(&[0x07; 33]).is_err());
        assert!(ParticipantId::from_bytes(&[TAG_TEST_DOUBLE; 12]).is_err());
        let mut bad = vec![TAG_ED25519];
        // y = 2 does not decompress to a point on edwards25519.
        let mut y = [0u8; 32];
        y[0] = 2;
        bad.extend_from_slice(&y);
        bad.extend_from_slice(&[0u8; 32]);
        assert!(ParticipantId::from_bytes(&bad).is_err());
    }

    #[test]
    fn signatures_round_trip_and_reject_other_signers() {
        for scheme in SCHEMES {
            let mut rng = ChaCha20Rng::seed_from_u64(4);
            let alice = gen_keypair(scheme, &mut rng);
            let bob = gen_keypair(scheme, &mut rng);
            let msg = b"vote share for worker 2";
            let sig = sign(msg, &alice);
            assert_eq!(sig.len(), scheme.signature_len());
            assert!(verify(msg, &sig, alice.id()));
            assert!(!verify(msg, &sig, bob.id()));
            assert!(!verify(msg, &sig[..10], alice.id()));
            assert!(!verify(msg, &[], alice.id()));
        }
    }

    #[test]
    fn every_single_byte_mutation_breaks_the_signature() {
        for scheme in SCHEMES {
            let mut rng = ChaCha20Rng::seed_from_u64(5);
            let kp = gen_keypair(scheme, &mut rng);
            let msg: Vec<u8> = (0u8..48).collect();
            let sig = sign(&msg, &kp);
            for i in 0..msg.len() {
                let mut m = msg.clone();
                m[i] ^= 0x01;
                assert!(!verify(&m, &sig, kp.id()), "message byte {i}");
            }
            for i in 0..sig.len() {
                let mut s = sig.clone();
                s[i] ^= 0x80;
                assert!(!verify(&msg, &s, kp.id()), "signature byte {i}");
            }
        }
    }

    #[test]
    fn encryption_round_trips_and_rejects_wrong_keys() {
        for scheme in SCHEMES {
            let mut rng = ChaCha20Rng::seed_from_u64(6);
            let worker = gen_keypair(scheme, &mut rng);
            let other = gen_keypair(scheme, &mut rng);
            let plaintext = b"share bytes: 0123456789abcdefXYZ!".to_vec();
            let ct = encrypt(&plaintext, worker.id(), &mut rng);
            assert_eq!(ct.blob.len(), scheme.ciphertext_len(plaintext.len()));
            assert_eq!(decrypt(&ct, &worker).unwrap(), plaintext);
            assert_eq!(decrypt(&ct, &other), Err(CryptoError::WrongRecipient));
            // Same blob relabelled for the other key still fails.
            let relabelled = Ciphertext {
                recipient: other.id().clone(),
                blob: ct.blob.clone(),
            };
            assert_eq!(decrypt(&relabelled, &other), Err(CryptoError::DecryptionFailed));
            let mut tampered = ct.clone();
            *tampered.blob.last_mut().unwrap() ^= 1;
            assert_eq!(decrypt(&tampered, &worker), Err(CryptoError::DecryptionFailed));
        }
    }

    #[test]
    fn encryption_is_randomized() {
        for scheme in SCHEMES {
            let mut rng = ChaCha20Rng::seed_from_u64(7);
            let worker = gen_keypair(scheme, &mut rng);
            let blobs: BTreeSet<Vec<u8>> = (0..100)
                .map(|_| encrypt(b"same plaintext", worker.id(), &mut rng).blob)
                .collect();
            assert_eq!(blobs.len(), 100);
        }
    }

    #[test]
    fn debug_output_hides_private_key() {
        let kp = gen_keypair(Scheme::Ed25519, &mut ChaCha20Rng::seed_from_u64(8));
        let rendered = format!("{kp:?}");
        assert!(!rendered.contains(&hex::encode(kp.secret_bytes())));
        assert!(!rendered.contains(&hex::encode(&kp.secret_bytes()[..8])));
    }
}
