#ifndef DUALFORGE_COMM_HPP
#define DUALFORGE_COMM_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "dualforge/vecops.hpp"

namespace dualforge {

// ---------------------------------------------------------------------------
// Wire codec. Vectors travel as
//   [u32 tag][u32 count][payload]
// with tag 0 = dense (count doubles) and tag 1 = sparse (count u32 indices
// followed by count doubles). All integers and the IEEE-754 bit patterns are
// little-endian, so decode(encode(v)) is the identity bitwise. The decoder
// needs the expected dimension, which every message carries per round.
// ---------------------------------------------------------------------------

using Bytes = std::vector<std::uint8_t>;

void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
void put_f64(Bytes& out, double v);
std::uint32_t get_u32(const std::uint8_t*& p, const std::uint8_t* end);
std::uint64_t get_u64(const std::uint8_t*& p, const std::uint8_t* end);
double get_f64(const std::uint8_t*& p, const std::uint8_t* end);

// Encodes sparse when nnz < dim/4, dense otherwise.
void encode_vec(const Vec& v, Bytes& out);
Vec decode_vec(const std::uint8_t*& p, const std::uint8_t* end, std::size_t expect_dim);

// ---------------------------------------------------------------------------
// Round messages.
// ---------------------------------------------------------------------------

enum class MsgKind : std::uint32_t {
  kStep = 0,           // sync, evaluate, run one local step
  kFinalizeRevert = 1, // roll back the last step and report alpha
  kShutdown = 2,
};

struct RoundBroadcast {
  MsgKind kind = MsgKind::kStep;
  std::int32_t round = 0;      // global round id; also keys the worker stream
  bool want_loss = true;       // evaluate loss_sum at the synced iterate
  bool want_alpha = false;     // include the alpha vector in the result
  Vec delta_v_tilde;           // direction increment (identical to every worker)
  double kappa = 0.0;          // stage metadata
  std::int32_t y_version = 0;  // stage metadata
};

struct RoundResult {
  std::int32_t worker_id = -1;
  std::int32_t round = 0;
  Vec delta_v;
  double loss_sum = 0.0;  // at the synced iterate, before the step
  double conj_sum = 0.0;  // after the step
  std::uint64_t n_ell = 0;
  std::vector<double> alpha;  // only when requested
};

Bytes encode_broadcast(const RoundBroadcast& msg);
RoundBroadcast decode_broadcast(const Bytes& frame, std::size_t dim);
Bytes encode_result(const RoundResult& msg);
RoundResult decode_result(const Bytes& frame, std::size_t dim);

struct CommStats {
  std::size_t rounds = 0;       // completed broadcast+gather pairs
  std::size_t messages_up = 0;
  std::size_t messages_down = 0;
  std::size_t bytes_up = 0;
  std::size_t bytes_down = 0;
  double broadcast_ms = 0.0;
  double gather_ms = 0.0;
};

// ---------------------------------------------------------------------------
// In-process transport between one coordinator and m workers. Each round is
// a synchronous superstep: broadcast delivers an identical frame to every
// worker inbox, gather blocks until all m results arrive and returns them in
// ascending worker id regardless of arrival order. Messages cross threads as
// encoded bytes only. The broadcast/gather alternation is enforced.
// ---------------------------------------------------------------------------

class Hub {
 public:
  Hub(std::size_t m, std::size_t dim, double gather_timeout_s = 120.0);

  // coordinator side
  void broadcast(const RoundBroadcast& msg);
  std::vector<RoundResult> gather();
  void shutdown();  // wakes every worker with a kShutdown frame
  const CommStats& stats() const { return stats_; }

  // worker side
  RoundBroadcast worker_recv(std::size_t worker_id);
  void worker_send(const RoundResult& result);
  void worker_fail(std::size_t worker_id, const std::string& what);

  std::size_t workers() const { return inboxes_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  struct UpFrame {
    bool failed = false;
    std::int32_t worker_id = -1;
    std::string error;
    Bytes frame;
  };

  std::size_t dim_;
  double timeout_s_;
  std::mutex mu_;
  std::condition_variable cv_up_;
  std::vector<std::condition_variable> cv_down_;
  std::vector<std::deque<Bytes>> inboxes_;
  std::deque<UpFrame> outbox_;
  bool awaiting_results_ = false;
  bool shut_down_ = false;
  CommStats stats_;
};

}  // namespace dualforge

#endif  // DUALFORGE_COMM_HPP
