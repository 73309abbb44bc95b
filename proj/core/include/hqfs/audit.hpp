#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqfs/error.hpp"
#include "hqfs/hash.hpp"

namespace hqfs {

using KeyId = std::array<std::uint8_t, 8>;

/// SHA-256 over a version tag, the checkpoint's canonical bytes, the weights
/// as little-endian f64 in universe order and t as i64 epoch seconds.
Digest canonical_hash(std::span<const std::uint8_t> checkpoint, std::span<const double> weights, std::int64_t t);

inline constexpr std::uint8_t kLamportScheme = 1;
inline constexpr std::size_t kLamportBits = 256;

class KeyReuseError : public AuditError {
 public:
  explicit KeyReuseError(const std::string& what) : AuditError(what) {}
};

struct PublicKey {
  std::uint8_t scheme = kLamportScheme;
  std::uint32_t height = 0;  // capacity = 2^height one-time keys
  Digest root{};

  std::vector<std::uint8_t> serialize() const;
  static PublicKey deserialize(std::span<const std::uint8_t> bytes);
  KeyId id() const;
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

struct SecretKey {
  std::uint8_t scheme = kLamportScheme;
  std::uint32_t height = 0;
  std::uint32_t next_slot = 0;  // every slot below this has been used
  Digest seed{};

  std::uint32_t capacity() const { return std::uint32_t{1} << height; }
  std::vector<std::uint8_t> serialize() const;
  static SecretKey deserialize(std::span<const std::uint8_t> bytes);
  friend bool operator==(const SecretKey&, const SecretKey&) = default;
};

/// Pluggable signing contract.
class Signer {
 public:
  virtual ~Signer() = default;
  virtual std::uint8_t scheme() const = 0;
  virtual KeyId key_id() const = 0;
  virtual std::size_t remaining() const = 0;
  virtual std::vector<std::uint8_t> sign(const Digest& message) = 0;
};

/// Lamport one-time signatures over SHA-256; the 2^height one-time public
/// keys are committed by a hash tree whose root is the public key.
class LamportSigner : public Signer {
 public:
  explicit LamportSigner(SecretKey sk);

  std::uint8_t scheme() const override { return kLamportScheme; }
  KeyId key_id() const override { return public_key().id(); }
  std::size_t remaining() const override { return sk_.capacity() - sk_.next_slot; }
  const PublicKey& public_key() const;
  const SecretKey& secret_key() const { return sk_; }

  /// Signs with the next unused slot and advances the counter.
  std::vector<std::uint8_t> sign(const Digest& message) override;
  /// Throws KeyReuseError for a slot that was already consumed.
  std::vector<std::uint8_t> sign_at(std::uint32_t slot, const Digest& message);

 private:
  void build_tree() const;

  SecretKey sk_;
  mutable std::vector<std::vector<Digest>> levels_;  // levels_[0] = leaves
  mutable PublicKey pk_;
};

struct KeyPair {
  SecretKey sk;
  PublicKey pk;
};

/// `capacity` is rounded up to a power of two.
KeyPair lamport_keygen(const Digest& seed, std::uint32_t capacity);
Digest seed_from_u64(std::uint64_t seed);

/// Pure; false for any malformed or mismatching signature.
bool verify_signature(const PublicKey& pk, const Digest& message, std::span<const std::uint8_t> signature);
std::size_t lamport_signature_size(std::uint32_t height);

struct AuditRecord {
  std::int64_t t = 0;
  std::vector<std::string> tickers;
  std::vector<double> weights;
  Digest checkpoint_id{};  // SHA-256 of the checkpoint bytes
  Digest digest{};         // canonical_hash(checkpoint, weights, t)
  KeyId key_id{};
  std::vector<std::uint8_t> signature;

  std::vector<std::uint8_t> serialize() const;
  static AuditRecord deserialize(std::span<const std::uint8_t> body);
  friend bool operator==(const AuditRecord&, const AuditRecord&) = default;
};

inline constexpr std::uint16_t kAuditRecordVersion = 1;

/// Append-only log: "HQFSAUD1" then u32-length-prefixed record bodies.
class AuditLog {
 public:
  /// Creates the file (with its header) if absent, otherwise validates it.
  explicit AuditLog(std::filesystem::path path);

  /// Rejects a timestamp earlier than the last record's.
  void append(const AuditRecord& record);
  std::size_t size() const { return count_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::size_t count_ = 0;
  std::optional<std::int64_t> last_t_;
};

/// Throws AuditError on a bad header or a truncated record.
std::vector<AuditRecord> read_audit_log(const std::filesystem::path& path);

enum class DigestCheck { ok, mismatch, unavailable };
const char* to_string(DigestCheck check);

struct RecordVerdict {
  std::size_t index = 0;
  std::int64_t t = 0;
  bool signature_ok = false;
  bool key_ok = false;
  bool order_ok = false;
  DigestCheck digest = DigestCheck::unavailable;
  bool ok() const { return signature_ok && key_ok && order_ok && digest != DigestCheck::mismatch; }
};

struct LogVerdict {
  std::vector<RecordVerdict> records;
  bool ok() const;
  std::size_t failures() const;
};

/// Checkpoint bytes keyed by their SHA-256.
using CheckpointStore = std::map<Digest, std::vector<std::uint8_t>>;
CheckpointStore load_checkpoints(const std::filesystem::path& dir);

LogVerdict verify_log(const std::vector<AuditRecord>& records, const PublicKey& pk,
                      const CheckpointStore* checkpoints = nullptr);
LogVerdict verify_log(const std::filesystem::path& path, const PublicKey& pk,
                      const CheckpointStore* checkpoints = nullptr);

/// Signs and logs each rebalance decision; never alters the decision itself.
class Auditor {
 public:
  /// `persist` runs after each signature is produced and before the record is
  /// written, so a consumed slot is on disk before it becomes visible.
  Auditor(Signer& signer, AuditLog& log, std::vector<std::uint8_t> checkpoint,
          std::function<void()> persist = {});

  const AuditRecord& record(std::int64_t t, std::vector<std::string> tickers, std::vector<double> weights);
  /// Wall time of each sign-and-append call.
  const std::vector<double>& latencies_ms() const { return latencies_; }
  const AuditRecord& last() const { return last_; }

 private:
  Signer& signer_;
  AuditLog& log_;
  std::vector<std::uint8_t> checkpoint_;
  Digest checkpoint_id_{};
  KeyId key_id_{};
  std::function<void()> persist_;
  std::vector<double> latencies_;
  AuditRecord last_;
};

}  // namespace hqfs
