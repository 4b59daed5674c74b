#pragma once

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "alseg/corpus.h"

namespace alseg {

enum class TaskStatus { kPending, kSubmitted, kCancelled };

struct AnnotationTask {
  int task_id = 0;
  int sentence_id = 0;
  std::u32string chars;
  int iteration = 0;
  TaskStatus status = TaskStatus::kPending;
  std::vector<int> boundaries;  // as submitted
  TagSeq tags;
};

enum class SubmitOutcome { kAccepted, kUnknownTask, kAlreadySubmitted, kInvalid };

struct SubmitResult {
  SubmitOutcome outcome = SubmitOutcome::kAccepted;
  std::string reason;
};

// Work queue between the loop (producer/consumer of labels) and annotators.
// Every method takes the one mutex, so the queue is its own serialising owner.
class AnnotationQueue {
 public:
  using Clock = std::chrono::steady_clock;

  explicit AnnotationQueue(Clock::duration lease = std::chrono::seconds(300)) : lease_(lease) {}

  // Task ids are assigned from a counter and never reused.
  std::vector<int> enqueue(int iteration, const std::vector<Sentence>& sentences);

  // Up to k pending tasks nobody else holds a live lease on; the returned
  // tasks are leased until now + lease.
  std::vector<AnnotationTask> lease_batch(int k, Clock::time_point now = Clock::now());

  // Boundaries are cut positions (word ends) in 1..Len-1, strictly increasing.
  SubmitResult submit(int task_id, const std::vector<int>& boundaries);

  // Blocks until every listed task is submitted or `deadline` passes; returns
  // sentence id -> tags for the submitted ones.
  std::map<int, TagSeq> wait_for(const std::vector<int>& task_ids, Clock::time_point deadline);

  // Withdraws still-pending tasks (e.g. after the deadline).
  void cancel(const std::vector<int>& task_ids);

  struct Counts {
    int pending = 0;
    int submitted = 0;
  };
  Counts counts() const;
  std::optional<AnnotationTask> task(int task_id) const;

 private:
  struct Entry {
    AnnotationTask task;
    Clock::time_point lease_until{};
  };

  mutable std::mutex mu_;
  std::condition_variable changed_;
  std::map<int, Entry> tasks_;
  int next_id_ = 1;
  Clock::duration lease_;
};

}  // namespace alseg
