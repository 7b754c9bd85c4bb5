#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace wfmini {

/// Shared rendezvous state for one group of in-process ranks. Collectives
/// deposit a pointer to their local buffer, meet at a barrier, read every
/// peer's buffer in rank order, and meet again before returning.
///
/// A barrier that does not fill within `timeout` poisons the group with
/// CollectiveMismatch; abort() poisons it on behalf of a failed peer. Both
/// wake every waiter.
class CommGroup {
 public:
  explicit CommGroup(int size, std::chrono::milliseconds timeout = std::chrono::seconds(60));

  int size() const noexcept { return size_; }
  std::chrono::milliseconds timeout() const noexcept { return timeout_; }

  void abort(const std::string& reason);
  bool aborted() const;

  void barrier(int rank);
  std::vector<double> allreduce_sum(int rank, std::span<const double> local, int threads = 1);
  std::vector<double> allgather(int rank, std::span<const double> local);

 private:
  struct Slot {
    std::string op;
    std::size_t count = 0;
    const double* data = nullptr;
  };

  void post(int rank, std::string op, std::span<const double> local);
  void check_posts(const std::string& op) const;

  const int size_;
  const std::chrono::milliseconds timeout_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;
  bool poisoned_ = false;
  bool timed_out_ = false;
  std::string reason_;
  std::vector<Slot> slots_;
};

/// One rank's handle on a CommGroup.
class Communicator {
 public:
  Communicator(std::shared_ptr<CommGroup> group, int rank);

  /// Handles for ranks 0..size-1 sharing one fresh group.
  static std::vector<Communicator> create(int size,
                                          std::chrono::milliseconds timeout = std::chrono::seconds(60));

  int size() const noexcept { return group_->size(); }
  int rank_id() const noexcept { return rank_; }
  CommGroup& group() const noexcept { return *group_; }

  void barrier() const { group_->barrier(rank_); }
  void allreduce(std::span<double> inout, int threads = 1) const;
  std::vector<double> allgather(std::span<const double> local) const { return group_->allgather(rank_, local); }

 private:
  std::shared_ptr<CommGroup> group_;
  int rank_;
};

}  // namespace wfmini
