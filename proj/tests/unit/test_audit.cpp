#include <gtest/gtest.h>
#include <openssl/sha.h>

#include <cstring>
#include <fstream>
#include <random>

#include "fixtures.hpp"
#include "hqfs/audit.hpp"
#include "hqfs/bytes.hpp"

using namespace hqfs;

namespace {

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));  // the test hosts are little-endian
  out.insert(out.end(), b, b + sizeof(T));
}

// Builds the canonical preimage by hand and hashes it with OpenSSL's one-shot API.
Digest reference_hash(const std::vector<std::uint8_t>& ckpt, const std::vector<double>& w, std::int64_t t) {
  std::vector<std::uint8_t> buf;
  const std::string tag = "HQFS-AUDIT-v1";
  buf.insert(buf.end(), tag.begin(), tag.end());
  append_le<std::uint64_t>(buf, ckpt.size());
  buf.insert(buf.end(), ckpt.begin(), ckpt.end());
  append_le<std::uint64_t>(buf, w.size());
  for (double x : w) append_le(buf, x);
  append_le(buf, t);
  Digest d{};
  SHA256(buf.data(), buf.size(), d.data());
  return d;
}

const std::vector<std::uint8_t> kCheckpoint{'c', 'k', 'p', 't', 0, 1, 2, 3};

}  // namespace

TEST(Audit, Sha256KnownVector) {
  EXPECT_EQ(to_hex(sha256(std::string_view("abc"))),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Sha256 h;
  h.update(std::string_view("a")).update(std::string_view("bc"));
  EXPECT_EQ(h.finish(), sha256(std::string_view("abc")));
  EXPECT_EQ(digest_from_hex(to_hex(sha256(std::string_view("x")))), sha256(std::string_view("x")));
}

TEST(Audit, CanonicalHashMatchesHandBuiltPreimage) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> w(static_cast<std::size_t>(k % 7));
    for (auto& x : w) x = u(rng);
    const std::int64_t t = 1600000000 + k * 86400;
    EXPECT_EQ(canonical_hash(kCheckpoint, w, t), reference_hash(kCheckpoint, w, t));
  }
}

TEST(Audit, CanonicalHashSeparatesFields) {
  const std::vector<double> w{0.5, 0.5};
  const auto base = canonical_hash(kCheckpoint, w, 10);
  EXPECT_NE(base, canonical_hash(kCheckpoint, w, 11));
  EXPECT_NE(base, canonical_hash(kCheckpoint, std::vector<double>{0.5, 0.5000000000000001}, 10));
  auto other = kCheckpoint;
  other.back() ^= 1;
  EXPECT_NE(base, canonical_hash(other, w, 10));
}

TEST(Audit, SignAndVerify) {
  auto keys = lamport_keygen(seed_from_u64(7), 4);
  EXPECT_EQ(keys.pk.height, 2u);
  LamportSigner signer(keys.sk);
  EXPECT_EQ(signer.public_key(), keys.pk);
  EXPECT_EQ(signer.remaining(), 4u);
  const Digest m = sha256(std::string_view("decision"));
  for (int i = 0; i < 4; ++i) {
    const auto sig = signer.sign(m);
    EXPECT_EQ(sig.size(), lamport_signature_size(2));
    EXPECT_TRUE(verify_signature(keys.pk, m, sig));
    EXPECT_FALSE(verify_signature(keys.pk, sha256(std::string_view("other")), sig));
  }
  EXPECT_EQ(signer.remaining(), 0u);
  EXPECT_THROW(signer.sign(m), AuditError);
}

TEST(Audit, CapacityRoundsUpToPowerOfTwo) {
  EXPECT_EQ(lamport_keygen(seed_from_u64(1), 1).pk.height, 0u);
  EXPECT_EQ(lamport_keygen(seed_from_u64(1), 5).pk.height, 3u);
  EXPECT_EQ(lamport_keygen(seed_from_u64(1), 5).sk.capacity(), 8u);
  EXPECT_THROW(lamport_keygen(seed_from_u64(1), 0), AuditError);
}

TEST(Audit, SingleSlotKeyVerifies) {
  const auto keys = lamport_keygen(seed_from_u64(3), 1);
  LamportSigner signer(keys.sk);
  const Digest m = sha256(std::string_view("m"));
  EXPECT_TRUE(verify_signature(keys.pk, m, signer.sign(m)));
}

TEST(Audit, SlotReuseIsRejected) {
  LamportSigner signer(lamport_keygen(seed_from_u64(8), 4).sk);
  const Digest m = sha256(std::string_view("m"));
  signer.sign_at(2, m);
  EXPECT_EQ(signer.secret_key().next_slot, 3u);
  EXPECT_THROW(signer.sign_at(1, m), KeyReuseError);
  EXPECT_THROW(signer.sign_at(2, m), KeyReuseError);
  EXPECT_NO_THROW(signer.sign_at(3, m));
}

TEST(Audit, SignatureMutationsAreRejected) {
  const auto keys = lamport_keygen(seed_from_u64(9), 4);
  LamportSigner signer(keys.sk);
  const Digest m = sha256(std::string_view("m"));
  const auto sig = signer.sign(m);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 200; ++k) {
    auto bad = sig;
    bad[rng() % bad.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    EXPECT_FALSE(verify_signature(keys.pk, m, bad));
  }
  auto shorter = sig;
  shorter.pop_back();
  EXPECT_FALSE(verify_signature(keys.pk, m, shorter));
  const auto other = lamport_keygen(seed_from_u64(10), 4).pk;
  EXPECT_FALSE(verify_signature(other, m, sig));
}

TEST(Audit, KeysRoundTripAndRejectCorruption) {
  auto keys = lamport_keygen(seed_from_u64(11), 8);
  keys.sk.next_slot = 3;
  EXPECT_EQ(SecretKey::deserialize(keys.sk.serialize()), keys.sk);
  EXPECT_EQ(PublicKey::deserialize(keys.pk.serialize()), keys.pk);
  auto bytes = keys.pk.serialize();
  bytes.push_back(0);
  EXPECT_THROW(PublicKey::deserialize(bytes), AuditError);
  bytes = keys.sk.serialize();
  bytes.resize(10);
  EXPECT_THROW(SecretKey::deserialize(bytes), AuditError);
  keys.sk.next_slot = 9;
  EXPECT_THROW(SecretKey::deserialize(keys.sk.serialize()), AuditError);
  // The id is the leading 8 bytes of the hash of the serialized public key.
  const auto full = sha256(keys.pk.serialize());
  const auto id = keys.pk.id();
  EXPECT_TRUE(std::equal(id.begin(), id.end(), full.begin()));
}

TEST(Audit, RecordRoundTrip) {
  AuditRecord r;
  r.t = -5;
  r.tickers = {"AAA", "BB"};
  r.weights = {0.25, 0.75};
  r.checkpoint_id = sha256(std::string_view("c"));
  r.digest = sha256(std::string_view("d"));
  r.key_id = {1, 2, 3, 4, 5, 6, 7, 8};
  r.signature = {9, 9, 9};
  EXPECT_EQ(AuditRecord::deserialize(r.serialize()), r);
  auto body = r.serialize();
  body.pop_back();
  EXPECT_THROW(AuditRecord::deserialize(body), AuditError);
  r.tickers.pop_back();
  EXPECT_THROW(r.serialize(), AuditError);
}

TEST(Audit, LogAppendsVerifiesAndReopens) {
  const auto dir = fixtures::scratch("audit_log");
  const auto keys = lamport_keygen(seed_from_u64(12), 8);
  LamportSigner signer(keys.sk);
  std::vector<std::uint32_t> persisted;
  {
    AuditLog log(dir / "audit.log");
    Auditor auditor(signer, log, kCheckpoint, [&] { persisted.push_back(signer.secret_key().next_slot); });
    auditor.record(100, {"A", "B"}, {0.4, 0.6});
    auditor.record(200, {"A", "C"}, {0.5, 0.5});
    EXPECT_EQ(auditor.latencies_ms().size(), 2u);
    EXPECT_EQ(log.size(), 2u);
    EXPECT_EQ(auditor.last().t, 200);
  }
  EXPECT_EQ(persisted, (std::vector<std::uint32_t>{1, 2}));

  AuditLog reopened(dir / "audit.log");
  EXPECT_EQ(reopened.size(), 2u);
  AuditRecord early;
  early.t = 150;
  EXPECT_THROW(reopened.append(early), AuditError);

  CheckpointStore store{{sha256(kCheckpoint), kCheckpoint}};
  const auto v = verify_log(dir / "audit.log", keys.pk, &store);
  ASSERT_EQ(v.records.size(), 2u);
  EXPECT_TRUE(v.ok());
  EXPECT_EQ(v.records[0].digest, DigestCheck::ok);
  const auto bare = verify_log(dir / "audit.log", keys.pk);
  EXPECT_EQ(bare.records[1].digest, DigestCheck::unavailable);
  EXPECT_TRUE(bare.ok());
}

TEST(Audit, TamperedWeightsFailTheDigestCheck) {
  const auto dir = fixtures::scratch("audit_tamper");
  const auto keys = lamport_keygen(seed_from_u64(13), 2);
  LamportSigner signer(keys.sk);
  AuditLog log(dir / "audit.log");
  Auditor auditor(signer, log, kCheckpoint);
  auditor.record(1, {"A", "B"}, {0.3, 0.7});
  auto records = read_audit_log(dir / "audit.log");
  records[0].weights[0] = 0.31;
  CheckpointStore store{{sha256(kCheckpoint), kCheckpoint}};
  const auto v = verify_log(records, keys.pk, &store);
  EXPECT_EQ(v.records[0].digest, DigestCheck::mismatch);
  EXPECT_TRUE(v.records[0].signature_ok);  // the signature covers the digest, which is untouched
  EXPECT_FALSE(v.ok());
  EXPECT_EQ(v.failures(), 1u);

  records = read_audit_log(dir / "audit.log");
  records[0].digest[0] ^= 1;
  EXPECT_FALSE(verify_log(records, keys.pk).records[0].signature_ok);
  records = read_audit_log(dir / "audit.log");
  records[0].key_id[0] ^= 1;
  EXPECT_FALSE(verify_log(records, keys.pk).records[0].key_ok);
}

TEST(Audit, OutOfOrderRecordsAreFlagged) {
  const auto keys = lamport_keygen(seed_from_u64(14), 2);
  LamportSigner signer(keys.sk);
  std::vector<AuditRecord> recs(2);
  for (std::int64_t i = 0; i < 2; ++i) {
    auto& r = recs[static_cast<std::size_t>(i)];
    r.t = 10 - i;
    r.digest = canonical_hash(kCheckpoint, r.weights, r.t);
    r.key_id = keys.pk.id();
    r.signature = signer.sign(r.digest);
  }
  const auto v = verify_log(recs, keys.pk);
  EXPECT_TRUE(v.records[0].order_ok);
  EXPECT_FALSE(v.records[1].order_ok);
}

TEST(Audit, TruncatedLogIsAnError) {
  const auto dir = fixtures::scratch("audit_trunc");
  LamportSigner signer(lamport_keygen(seed_from_u64(15), 2).sk);
  {
    AuditLog log(dir / "audit.log");
    Auditor(signer, log, kCheckpoint).record(1, {"A"}, {1.0});
  }
  auto bytes = read_file_bytes(dir / "audit.log");
  bytes.resize(bytes.size() - 5);
  write_file_bytes(dir / "cut.log", bytes);
  EXPECT_THROW(read_audit_log(dir / "cut.log"), AuditError);
  write_file_bytes(dir / "bad.log", std::vector<std::uint8_t>{'n', 'o', 'p', 'e'});
  EXPECT_THROW(read_audit_log(dir / "bad.log"), AuditError);
  EXPECT_THROW(read_audit_log(dir / "missing.log"), AuditError);
}

TEST(Audit, CheckpointDirectoryIsIndexedByHash) {
  const auto dir = fixtures::scratch("audit_ckpt");
  write_file_bytes(dir / "a.ckpt", kCheckpoint);
  write_file_bytes(dir / "ignored.bin", std::vector<std::uint8_t>{1});
  const auto store = load_checkpoints(dir);
  ASSERT_EQ(store.size(), 1u);
  EXPECT_EQ(store.begin()->first, sha256(kCheckpoint));
  EXPECT_THROW(load_checkpoints(dir / "nope"), AuditError);
}
