#include "wfmini/comm.hpp"

#include <algorithm>

#include "wfmini/error.hpp"

namespace wfmini {

CommGroup::CommGroup(int size, std::chrono::milliseconds timeout)
    : size_(size), timeout_(timeout), slots_(static_cast<std::size_t>(std::max(size, 0))) {
  if (size < 1) throw Error(ErrorCode::InvalidParameter, "communicator size must be >= 1");
}

void CommGroup::abort(const std::string& reason) {
  {
    std::lock_guard lk(mu_);
    if (!poisoned_) {
      poisoned_ = true;
      reason_ = reason;
    }
  }
  cv_.notify_all();
}

bool CommGroup::aborted() const {
  std::lock_guard lk(mu_);
  return poisoned_;
}

void CommGroup::barrier(int rank) {
  if (rank < 0 || rank >= size_) throw Error(ErrorCode::InvalidParameter, "rank out of range");
  std::unique_lock lk(mu_);
  auto fail = [&] {
    throw Error(timed_out_ ? ErrorCode::CollectiveMismatch : ErrorCode::KernelFailure,
                "communicator aborted: " + reason_);
  };
  if (poisoned_) fail();
  const auto gen = generation_;
  if (++arrived_ == size_) {
    arrived_ = 0;
    ++generation_;
    cv_.notify_all();
    return;
  }
  const bool released =
      cv_.wait_for(lk, timeout_, [&] { return generation_ != gen || poisoned_; });
  if (generation_ != gen) return;
  if (!released && !poisoned_) {
    poisoned_ = true;
    timed_out_ = true;
    reason_ = "not all ranks reached the collective within " + std::to_string(timeout_.count()) + " ms";
    cv_.notify_all();
  }
  fail();
}

void CommGroup::post(int rank, std::string op, std::span<const double> local) {
  std::lock_guard lk(mu_);
  slots_[static_cast<std::size_t>(rank)] = Slot{std::move(op), local.size(), local.data()};
}

void CommGroup::check_posts(const std::string& op) const {
  std::lock_guard lk(mu_);
  for (const auto& s : slots_) {
    if (s.op != op) throw Error(ErrorCode::CollectiveMismatch, "ranks entered different collectives");
  }
  for (const auto& s : slots_) {
    if (s.count != slots_.front().count)
      throw Error(ErrorCode::SizeMismatch, op + " called with unequal data_size across ranks");
  }
}

std::vector<double> CommGroup::allreduce_sum(int rank, std::span<const double> local, int threads) {
  post(rank, "allreduce", local);
  barrier(rank);
  check_posts("allreduce");
  const std::size_t n = local.size();
  std::vector<double> out(n, 0.0);
  // Every rank sums in rank order so all ranks hold bit-identical results.
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(std::max(1, threads))
  for (std::int64_t i = 0; i < count; ++i) {
    double s = 0.0;
    for (const auto& slot : slots_) s += slot.data[i];
    out[static_cast<std::size_t>(i)] = s;
  }
  barrier(rank);
  return out;
}

std::vector<double> CommGroup::allgather(int rank, std::span<const double> local) {
  post(rank, "allgather", local);
  barrier(rank);
  check_posts("allgather");
  std::vector<double> out;
  out.reserve(local.size() * slots_.size());
  for (const auto& slot : slots_) out.insert(out.end(), slot.data, slot.data + slot.count);
  barrier(rank);
  return out;
}

Communicator::Communicator(std::shared_ptr<CommGroup> group, int rank) : group_(std::move(group)), rank_(rank) {
  if (rank < 0 || rank >= group_->size()) throw Error(ErrorCode::InvalidParameter, "rank_id out of range");
}

std::vector<Communicator> Communicator::create(int size, std::chrono::milliseconds timeout) {
  auto group = std::make_shared<CommGroup>(size, timeout);
  std::vector<Communicator> out;
  out.reserve(static_cast<std::size_t>(size));
  for (int r = 0; r < size; ++r) out.emplace_back(group, r);
  return out;
}

void Communicator::allreduce(std::span<double> inout, int threads) const {
  auto sum = group_->allreduce_sum(rank_, inout, threads);
  std::copy(sum.begin(), sum.end(), inout.begin());
}

}  // namespace wfmini
