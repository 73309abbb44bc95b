#include "hqfs/audit.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <fstream>

#include "hqfs/bytes.hpp"

namespace hqfs {

namespace {

constexpr std::string_view kAuditTag = "HQFS-AUDIT-v1";
constexpr std::string_view kSkTag = "hqfs/lamport/sk";
constexpr std::string_view kLogMagic = "HQFSAUD1";
constexpr std::string_view kPkMagic = "HQFSPK01";
constexpr std::string_view kSkMagic = "HQFSSK01";
constexpr std::uint8_t kLeafTag = 0x00;
constexpr std::uint8_t kNodeTag = 0x01;
constexpr std::uint8_t kMessageTag = 0x02;
constexpr std::uint32_t kMaxHeight = 20;

void put_u32(Sha256& h, std::uint32_t v) {
  const std::array<std::uint8_t, 4> b{static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                                      static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  h.update(b);
}

void put_u8(Sha256& h, std::uint8_t v) { h.update(std::span<const std::uint8_t>(&v, 1)); }

Digest secret_element(Sha256& h, const Digest& seed, std::uint32_t slot, std::uint16_t j, std::uint8_t b) {
  h.update(kSkTag).update(seed);
  put_u32(h, slot);
  const std::array<std::uint8_t, 2> jj{static_cast<std::uint8_t>(j), static_cast<std::uint8_t>(j >> 8)};
  h.update(jj);
  put_u8(h, b);
  return h.finish();
}

/// pk[j][b] for one slot, laid out as 2 * j + b.
std::vector<Digest> one_time_public(Sha256& h, const Digest& seed, std::uint32_t slot) {
  std::vector<Digest> pk(2 * kLamportBits);
  for (std::uint16_t j = 0; j < kLamportBits; ++j) {
    for (std::uint8_t b = 0; b < 2; ++b) pk[2 * j + b] = h.update(secret_element(h, seed, slot, j, b)).finish();
  }
  return pk;
}

Digest leaf_hash(Sha256& h, const std::vector<Digest>& pk) {
  put_u8(h, kLeafTag);
  for (const auto& d : pk) h.update(d);
  return h.finish();
}

Digest node_hash(Sha256& h, const Digest& left, const Digest& right) {
  put_u8(h, kNodeTag);
  return h.update(left).update(right).finish();
}

Digest bound_message(Sha256& h, const Digest& root, std::uint32_t slot, const Digest& message) {
  put_u8(h, kMessageTag);
  h.update(root);
  put_u32(h, slot);
  return h.update(message).finish();
}

bool bit(const Digest& d, std::size_t j) { return (d[j / 8] >> (7 - j % 8)) & 1; }

std::uint32_t height_for(std::uint32_t capacity) {
  if (capacity == 0) throw AuditError("key capacity must be >= 1");
  const auto h = static_cast<std::uint32_t>(std::bit_width(std::bit_ceil(capacity)) - 1);
  if (h > kMaxHeight) throw AuditError("key capacity exceeds 2^" + std::to_string(kMaxHeight));
  return h;
}

}  // namespace

Digest canonical_hash(std::span<const std::uint8_t> checkpoint, std::span<const double> weights, std::int64_t t) {
  ByteWriter w;
  w.raw(kAuditTag);
  w.u64(checkpoint.size());
  w.raw(checkpoint);
  w.u64(weights.size());
  w.f64s(weights);
  w.i64(t);
  return sha256(w.bytes());
}

std::vector<std::uint8_t> PublicKey::serialize() const {
  ByteWriter w;
  w.raw(kPkMagic);
  w.u8(scheme);
  w.u32(height);
  w.digest(root);
  return std::move(w).bytes();
}

PublicKey PublicKey::deserialize(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    r.expect_magic(kPkMagic);
    PublicKey pk;
    pk.scheme = r.u8();
    pk.height = r.u32();
    pk.root = r.digest();
    if (!r.done()) throw AuditError("public key: trailing bytes");
    if (pk.scheme != kLamportScheme || pk.height > kMaxHeight) throw AuditError("public key: unsupported scheme");
    return pk;
  } catch (const DataError& e) {
    throw AuditError(std::string("public key: ") + e.what());
  }
}

KeyId PublicKey::id() const {
  const Digest d = sha256(serialize());
  KeyId id{};
  std::copy_n(d.begin(), id.size(), id.begin());
  return id;
}

std::vector<std::uint8_t> SecretKey::serialize() const {
  ByteWriter w;
  w.raw(kSkMagic);
  w.u8(scheme);
  w.u32(height);
  w.u32(next_slot);
  w.digest(seed);
  return std::move(w).bytes();
}

SecretKey SecretKey::deserialize(std::span<const std::uint8_t> bytes) {
  try {
    ByteReader r(bytes);
    r.expect_magic(kSkMagic);
    SecretKey sk;
    sk.scheme = r.u8();
    sk.height = r.u32();
    sk.next_slot = r.u32();
    sk.seed = r.digest();
    if (!r.done()) throw AuditError("secret key: trailing bytes");
    if (sk.scheme != kLamportScheme || sk.height > kMaxHeight) throw AuditError("secret key: unsupported scheme");
    if (sk.next_slot > sk.capacity()) throw AuditError("secret key: slot counter beyond capacity");
    return sk;
  } catch (const DataError& e) {
    throw AuditError(std::string("secret key: ") + e.what());
  }
}

LamportSigner::LamportSigner(SecretKey sk) : sk_(sk) {
  if (sk_.scheme != kLamportScheme || sk_.height > kMaxHeight) throw AuditError("unsupported secret key");
}

void LamportSigner::build_tree() const {
  if (!levels_.empty()) return;
  Sha256 h;
  std::vector<Digest> level(sk_.capacity());
  for (std::uint32_t i = 0; i < sk_.capacity(); ++i) level[i] = leaf_hash(h, one_time_public(h, sk_.seed, i));
  levels_.push_back(level);
  while (levels_.back().size() > 1) {
    const auto& prev = levels_.back();
    std::vector<Digest> next(prev.size() / 2);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = node_hash(h, prev[2 * i], prev[2 * i + 1]);
    levels_.push_back(std::move(next));
  }
  pk_ = PublicKey{kLamportScheme, sk_.height, levels_.back()[0]};
}

const PublicKey& LamportSigner::public_key() const {
  build_tree();
  return pk_;
}

std::vector<std::uint8_t> LamportSigner::sign(const Digest& message) { return sign_at(sk_.next_slot, message); }

std::vector<std::uint8_t> LamportSigner::sign_at(std::uint32_t slot, const Digest& message) {
  if (slot >= sk_.capacity()) throw AuditError("one-time key chain exhausted (capacity " + std::to_string(sk_.capacity()) + ")");
  if (slot < sk_.next_slot) throw KeyReuseError("one-time key slot " + std::to_string(slot) + " was already used");
  build_tree();
  sk_.next_slot = slot + 1;

  Sha256 h;
  const Digest bound = bound_message(h, pk_.root, slot, message);
  const auto pk = one_time_public(h, sk_.seed, slot);
  ByteWriter w;
  w.u8(kLamportScheme);
  w.u32(slot);
  w.u32(sk_.height);
  for (std::uint16_t j = 0; j < kLamportBits; ++j) w.digest(secret_element(h, sk_.seed, slot, j, bit(bound, j)));
  for (std::size_t j = 0; j < kLamportBits; ++j) w.digest(pk[2 * j + (bit(bound, j) ? 0 : 1)]);
  std::size_t index = slot;
  for (std::uint32_t level = 0; level < sk_.height; ++level, index /= 2) w.digest(levels_[level][index ^ 1]);
  return std::move(w).bytes();
}

std::size_t lamport_signature_size(std::uint32_t height) { return 1 + 4 + 4 + 2 * kLamportBits * 32 + height * 32; }

KeyPair lamport_keygen(const Digest& seed, std::uint32_t capacity) {
  SecretKey sk{kLamportScheme, height_for(capacity), 0, seed};
  LamportSigner signer(sk);
  return {sk, signer.public_key()};
}

Digest seed_from_u64(std::uint64_t seed) {
  ByteWriter w;
  w.raw(std::string_view("hqfs/keygen/seed"));
  w.u64(seed);
  return sha256(w.bytes());
}

bool verify_signature(const PublicKey& pk, const Digest& message, std::span<const std::uint8_t> signature) {
  if (pk.scheme != kLamportScheme || signature.size() != lamport_signature_size(pk.height)) return false;
  ByteReader r(signature);
  if (r.u8() != kLamportScheme) return false;
  const std::uint32_t slot = r.u32();
  if (r.u32() != pk.height || (pk.height < 32 && slot >= (std::uint32_t{1} << pk.height))) return false;

  Sha256 h;
  const Digest bound = bound_message(h, pk.root, slot, message);
  std::vector<Digest> ots(2 * kLamportBits);
  for (std::size_t j = 0; j < kLamportBits; ++j) ots[2 * j + bit(bound, j)] = h.update(r.raw(32)).finish();
  for (std::size_t j = 0; j < kLamportBits; ++j) ots[2 * j + (bit(bound, j) ? 0 : 1)] = r.digest();
  Digest node = leaf_hash(h, ots);
  std::uint32_t index = slot;
  for (std::uint32_t level = 0; level < pk.height; ++level, index /= 2) {
    const Digest sibling = r.digest();
    node = (index & 1) ? node_hash(h, sibling, node) : node_hash(h, node, sibling);
  }
  return r.done() && node == pk.root;
}

std::vector<std::uint8_t> AuditRecord::serialize() const {
  if (tickers.size() != weights.size()) throw AuditError("audit record: tickers and weights differ in length");
  ByteWriter w;
  w.u16(kAuditRecordVersion);
  w.i64(t);
  w.u32(static_cast<std::uint32_t>(weights.size()));
  for (const auto& s : tickers) w.str(s);
  w.f64s(weights);
  w.digest(checkpoint_id);
  w.digest(digest);
  w.raw(key_id);
  w.u32(static_cast<std::uint32_t>(signature.size()));
  w.raw(signature);
  return std::move(w).bytes();
}

AuditRecord AuditRecord::deserialize(std::span<const std::uint8_t> body) {
  try {
    ByteReader r(body);
    if (r.u16() != kAuditRecordVersion) throw AuditError("audit record: unsupported version");
    AuditRecord rec;
    rec.t = r.i64();
    const std::uint32_t m = r.u32();
    if (m > r.remaining()) throw AuditError("audit record: implausible asset count");
    for (std::uint32_t i = 0; i < m; ++i) rec.tickers.push_back(r.str());
    rec.weights = r.f64s(m);
    rec.checkpoint_id = r.digest();
    rec.digest = r.digest();
    const auto id = r.raw(rec.key_id.size());
    std::copy(id.begin(), id.end(), rec.key_id.begin());
    const auto sig = r.raw(r.u32());
    rec.signature.assign(sig.begin(), sig.end());
    if (!r.done()) throw AuditError("audit record: trailing bytes");
    return rec;
  } catch (const DataError& e) {
    throw AuditError(std::string("audit record truncated: ") + e.what());
  }
}

std::vector<AuditRecord> read_audit_log(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const DataError& e) {
    throw AuditError(e.what());
  }
  std::vector<AuditRecord> out;
  try {
    ByteReader r(bytes);
    r.expect_magic(kLogMagic);
    while (!r.done()) {
      const std::uint32_t len = r.u32();
      out.push_back(AuditRecord::deserialize(r.raw(len)));
    }
  } catch (const DataError& e) {
    throw AuditError("audit log " + path.string() + " is truncated or corrupt: " + e.what());
  }
  return out;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (std::filesystem::exists(path_, ec) && std::filesystem::file_size(path_, ec) > 0) {
    const auto records = read_audit_log(path_);
    count_ = records.size();
    if (!records.empty()) last_t_ = records.back().t;
    return;
  }
  try {
    write_file_bytes(path_, std::span(reinterpret_cast<const std::uint8_t*>(kLogMagic.data()), kLogMagic.size()));
  } catch (const DataError& e) {
    throw AuditError(e.what());
  }
}

void AuditLog::append(const AuditRecord& record) {
  if (last_t_ && record.t < *last_t_) {
    throw AuditError("audit log: timestamp " + std::to_string(record.t) + " precedes the last record's " +
                     std::to_string(*last_t_));
  }
  const auto body = record.serialize();
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(body.size()));
  w.raw(body);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.size()));
  out.flush();
  if (!out) throw AuditError("audit log: failed to append to " + path_.string());
  ++count_;
  last_t_ = record.t;
}

const char* to_string(DigestCheck check) {
  switch (check) {
    case DigestCheck::ok: return "ok";
    case DigestCheck::mismatch: return "mismatch";
    case DigestCheck::unavailable: return "unavailable";
  }
  return "?";
}

bool LogVerdict::ok() const { return failures() == 0; }

std::size_t LogVerdict::failures() const {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.ok(); }));
}

CheckpointStore load_checkpoints(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw AuditError("checkpoint directory not found: " + dir.string());
  CheckpointStore store;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ckpt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto bytes = read_file_bytes(f);
    store.emplace(sha256(bytes), std::move(bytes));
  }
  return store;
}

LogVerdict verify_log(const std::vector<AuditRecord>& records, const PublicKey& pk, const CheckpointStore* checkpoints) {
  LogVerdict v;
  const KeyId id = pk.id();
  std::optional<std::int64_t> last;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    RecordVerdict rv;
    rv.index = i;
    rv.t = rec.t;
    rv.key_ok = rec.key_id == id;
    rv.signature_ok = verify_signature(pk, rec.digest, rec.signature);
    rv.order_ok = !last || rec.t >= *last;
    last = last ? std::max(*last, rec.t) : rec.t;
    if (checkpoints) {
      const auto it = checkpoints->find(rec.checkpoint_id);
      if (it != checkpoints->end()) {
        rv.digest = canonical_hash(it->second, rec.weights, rec.t) == rec.digest ? DigestCheck::ok : DigestCheck::mismatch;
      }
    }
    v.records.push_back(rv);
  }
  return v;
}

LogVerdict verify_log(const std::filesystem::path& path, const PublicKey& pk, const CheckpointStore* checkpoints) {
  return verify_log(read_audit_log(path), pk, checkpoints);
}

Auditor::Auditor(Signer& signer, AuditLog& log, std::vector<std::uint8_t> checkpoint, std::function<void()> persist)
    : signer_(signer), log_(log), checkpoint_(std::move(checkpoint)), checkpoint_id_(sha256(checkpoint_)),
      key_id_(signer.key_id()), persist_(std::move(persist)) {}

const AuditRecord& Auditor::record(std::int64_t t, std::vector<std::string> tickers, std::vector<double> weights) {
  const auto start = std::chrono::steady_clock::now();
  AuditRecord rec;
  rec.t = t;
  rec.tickers = std::move(tickers);
  rec.weights = std::move(weights);
  rec.checkpoint_id = checkpoint_id_;
  rec.digest = canonical_hash(checkpoint_, rec.weights, t);
  rec.key_id = key_id_;
  rec.signature = signer_.sign(rec.digest);
  if (persist_) persist_();
  log_.append(rec);
  last_ = std::move(rec);
  latencies_.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  return last_;
}

}  // namespace hqfs
