#include "dualforge/comm.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dualforge {

namespace {

[[noreturn]] void codec_fail(const char* what) {
  throw std::runtime_error(std::string("codec: ") + what);
}

}  // namespace

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(Bytes& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(const std::uint8_t*& p, const std::uint8_t* end) {
  if (end - p < 4) codec_fail("truncated buffer (u32)");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  p += 4;
  return v;
}

std::uint64_t get_u64(const std::uint8_t*& p, const std::uint8_t* end) {
  if (end - p < 8) codec_fail("truncated buffer (u64)");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  p += 8;
  return v;
}

double get_f64(const std::uint8_t*& p, const std::uint8_t* end) {
  return std::bit_cast<double>(get_u64(p, end));
}

void encode_vec(const Vec& v, Bytes& out) {
  std::size_t nnz = 0;
  for (double x : v)
    if (x != 0.0) ++nnz;

  if (nnz * 4 < v.size()) {
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(nnz));
    for (std::size_t j = 0; j < v.size(); ++j)
      if (v[j] != 0.0) put_u32(out, static_cast<std::uint32_t>(j));
    for (std::size_t j = 0; j < v.size(); ++j)
      if (v[j] != 0.0) put_f64(out, v[j]);
  } else {
    put_u32(out, 0);
    put_u32(out, static_cast<std::uint32_t>(v.size()));
    for (double x : v) put_f64(out, x);
  }
}

Vec decode_vec(const std::uint8_t*& p, const std::uint8_t* end, std::size_t expect_dim) {
  const std::uint32_t tag = get_u32(p, end);
  const std::uint32_t count = get_u32(p, end);
  if (tag == 0) {
    if (count != expect_dim) codec_fail("dense vector length mismatch");
    Vec v(count);
    for (auto& x : v) x = get_f64(p, end);
    return v;
  }
  if (tag == 1) {
    Vec v(expect_dim, 0.0);
    std::vector<std::uint32_t> idx(count);
    for (auto& j : idx) {
      j = get_u32(p, end);
      if (j >= expect_dim) codec_fail("sparse index out of range");
    }
    for (std::uint32_t j : idx) v[j] = get_f64(p, end);
    return v;
  }
  codec_fail("bad vector tag");
}

Bytes encode_broadcast(const RoundBroadcast& msg) {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(msg.kind));
  put_u32(out, static_cast<std::uint32_t>(msg.round));
  put_u32(out, (msg.want_loss ? 1u : 0u) | (msg.want_alpha ? 2u : 0u));
  put_u32(out, static_cast<std::uint32_t>(msg.y_version));
  put_f64(out, msg.kappa);
  encode_vec(msg.delta_v_tilde, out);
  return out;
}

RoundBroadcast decode_broadcast(const Bytes& frame, std::size_t dim) {
  const std::uint8_t* p = frame.data();
  const std::uint8_t* end = p + frame.size();
  RoundBroadcast msg;
  msg.kind = static_cast<MsgKind>(get_u32(p, end));
  msg.round = static_cast<std::int32_t>(get_u32(p, end));
  const std::uint32_t flags = get_u32(p, end);
  msg.want_loss = (flags & 1u) != 0;
  msg.want_alpha = (flags & 2u) != 0;
  msg.y_version = static_cast<std::int32_t>(get_u32(p, end));
  msg.kappa = get_f64(p, end);
  if (msg.kind != MsgKind::kShutdown) msg.delta_v_tilde = decode_vec(p, end, dim);
  return msg;
}

Bytes encode_result(const RoundResult& msg) {
  Bytes out;
  put_u32(out, static_cast<std::uint32_t>(msg.worker_id));
  put_u32(out, static_cast<std::uint32_t>(msg.round));
  put_f64(out, msg.loss_sum);
  put_f64(out, msg.conj_sum);
  put_u64(out, msg.n_ell);
  encode_vec(msg.delta_v, out);
  put_u32(out, static_cast<std::uint32_t>(msg.alpha.size()));
  for (double a : msg.alpha) put_f64(out, a);
  return out;
}

RoundResult decode_result(const Bytes& frame, std::size_t dim) {
  const std::uint8_t* p = frame.data();
  const std::uint8_t* end = p + frame.size();
  RoundResult msg;
  msg.worker_id = static_cast<std::int32_t>(get_u32(p, end));
  msg.round = static_cast<std::int32_t>(get_u32(p, end));
  msg.loss_sum = get_f64(p, end);
  msg.conj_sum = get_f64(p, end);
  msg.n_ell = get_u64(p, end);
  msg.delta_v = decode_vec(p, end, dim);
  const std::uint32_t alpha_len = get_u32(p, end);
  msg.alpha.resize(alpha_len);
  for (auto& a : msg.alpha) a = get_f64(p, end);
  return msg;
}

Hub::Hub(std::size_t m, std::size_t dim, double gather_timeout_s)
    : dim_(dim), timeout_s_(gather_timeout_s), cv_down_(m), inboxes_(m) {
  if (m == 0) throw std::invalid_argument("Hub: need at least one worker");
}

void Hub::broadcast(const RoundBroadcast& msg) {
  const auto start = std::chrono::steady_clock::now();
  Bytes frame = encode_broadcast(msg);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (awaiting_results_)
      throw std::logic_error("comm protocol violation: broadcast before gather completed");
    if (shut_down_) throw std::logic_error("comm: hub is shut down");
    for (std::size_t l = 0; l < inboxes_.size(); ++l) {
      inboxes_[l].push_back(frame);
      stats_.messages_down += 1;
      stats_.bytes_down += frame.size();
    }
    awaiting_results_ = true;
  }
  for (auto& cv : cv_down_) cv.notify_all();
  stats_.broadcast_ms +=
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::vector<RoundResult> Hub::gather() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<RoundResult> results;
  {
    std::unique_lock<std::mutex> lock(mu_);
    if (!awaiting_results_)
      throw std::logic_error("comm protocol violation: gather without broadcast");
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s_);
    std::size_t received = 0;
    results.resize(inboxes_.size());
    std::vector<bool> seen(inboxes_.size(), false);
    while (received < inboxes_.size()) {
      if (outbox_.empty()) {
        if (cv_up_.wait_until(lock, deadline) == std::cv_status::timeout)
          throw std::runtime_error("comm: gather timed out waiting for workers");
        continue;
      }
      UpFrame up = std::move(outbox_.front());
      outbox_.pop_front();
      if (up.failed)
        throw std::runtime_error("worker " + std::to_string(up.worker_id) +
                                 " failed: " + up.error);
      stats_.messages_up += 1;
      stats_.bytes_up += up.frame.size();
      RoundResult res = decode_result(up.frame, dim_);
      if (res.worker_id < 0 || static_cast<std::size_t>(res.worker_id) >= inboxes_.size() ||
          seen[res.worker_id])
        throw std::runtime_error("comm: duplicate or bad worker id in gather");
      seen[res.worker_id] = true;
      results[res.worker_id] = std::move(res);
      ++received;
    }
    awaiting_results_ = false;
    stats_.rounds += 1;
  }
  stats_.gather_ms +=
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return results;
}

void Hub::shutdown() {
  RoundBroadcast bye;
  bye.kind = MsgKind::kShutdown;
  Bytes frame = encode_broadcast(bye);
  {
    std::lock_guard<std::mutex> lock(mu_);
    shut_down_ = true;
    for (auto& inbox : inboxes_) inbox.push_back(frame);
  }
  for (auto& cv : cv_down_) cv.notify_all();
}

RoundBroadcast Hub::worker_recv(std::size_t worker_id) {
  std::unique_lock<std::mutex> lock(mu_);
  cv_down_[worker_id].wait(lock, [&] { return !inboxes_[worker_id].empty(); });
  Bytes frame = std::move(inboxes_[worker_id].front());
  inboxes_[worker_id].pop_front();
  lock.unlock();
  return decode_broadcast(frame, dim_);
}

void Hub::worker_send(const RoundResult& result) {
  UpFrame up;
  up.worker_id = result.worker_id;
  up.frame = encode_result(result);
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (shut_down_) return;  // straggler after abort; drop
    outbox_.push_back(std::move(up));
  }
  cv_up_.notify_one();
}

void Hub::worker_fail(std::size_t worker_id, const std::string& what) {
  UpFrame up;
  up.failed = true;
  up.worker_id = static_cast<std::int32_t>(worker_id);
  up.error = what;
  {
    std::lock_guard<std::mutex> lock(mu_);
    outbox_.push_back(std::move(up));
  }
  cv_up_.notify_one();
}

}  // namespace dualforge
