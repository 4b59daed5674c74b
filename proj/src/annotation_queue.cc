#include "alseg/annotation_queue.h"

#include "alseg/errors.h"

namespace alseg {

std::vector<int> AnnotationQueue::enqueue(int iteration, const std::vector<Sentence>& sentences) {
  std::vector<int> ids;
  {
    std::lock_guard lock(mu_);
    for (const auto& s : sentences) {
      if (s.chars.empty()) throw ContractError("cannot queue an empty sentence");
      Entry e;
      e.task.task_id = next_id_++;
      e.task.sentence_id = s.id;
      e.task.chars = s.chars;
      e.task.iteration = iteration;
      ids.push_back(e.task.task_id);
      tasks_.emplace(e.task.task_id, std::move(e));
    }
  }
  changed_.notify_all();
  return ids;
}

std::vector<AnnotationTask> AnnotationQueue::lease_batch(int k, Clock::time_point now) {
  std::vector<AnnotationTask> out;
  if (k <= 0) return out;
  std::lock_guard lock(mu_);
  for (auto& [id, e] : tasks_) {
    if (static_cast<int>(out.size()) >= k) break;
    if (e.task.status != TaskStatus::kPending || e.lease_until > now) continue;
    e.lease_until = now + lease_;
    out.push_back(e.task);
  }
  return out;
}

SubmitResult AnnotationQueue::submit(int task_id, const std::vector<int>& boundaries) {
  SubmitResult r;
  {
    std::lock_guard lock(mu_);
    auto it = tasks_.find(task_id);
    if (it == tasks_.end() || it->second.task.status == TaskStatus::kCancelled) {
      return {SubmitOutcome::kUnknownTask, "unknown task " + std::to_string(task_id)};
    }
    AnnotationTask& t = it->second.task;
    if (t.status == TaskStatus::kSubmitted) {
      return {SubmitOutcome::kAlreadySubmitted,
              "task " + std::to_string(task_id) + " was already submitted"};
    }
    const int len = static_cast<int>(t.chars.size());
    try {
      t.tags = tags_from_boundaries(len, boundaries);
    } catch (const ContractError& e) {
      return {SubmitOutcome::kInvalid, e.what()};
    }
    t.boundaries = boundaries;
    t.status = TaskStatus::kSubmitted;
  }
  changed_.notify_all();
  return r;
}

std::map<int, TagSeq> AnnotationQueue::wait_for(const std::vector<int>& task_ids,
                                                Clock::time_point deadline) {
  std::unique_lock lock(mu_);
  auto all_done = [&] {
    for (int id : task_ids) {
      auto it = tasks_.find(id);
      if (it != tasks_.end() && it->second.task.status == TaskStatus::kPending) return false;
    }
    return true;
  };
  changed_.wait_until(lock, deadline, all_done);
  std::map<int, TagSeq> out;
  for (int id : task_ids) {
    auto it = tasks_.find(id);
    if (it != tasks_.end() && it->second.task.status == TaskStatus::kSubmitted) {
      out[it->second.task.sentence_id] = it->second.task.tags;
    }
  }
  return out;
}

void AnnotationQueue::cancel(const std::vector<int>& task_ids) {
  {
    std::lock_guard lock(mu_);
    for (int id : task_ids) {
      auto it = tasks_.find(id);
      if (it != tasks_.end() && it->second.task.status == TaskStatus::kPending) {
        it->second.task.status = TaskStatus::kCancelled;
      }
    }
  }
  changed_.notify_all();
}

AnnotationQueue::Counts AnnotationQueue::counts() const {
  std::lock_guard lock(mu_);
  Counts c;
  for (const auto& [id, e] : tasks_) {
    if (e.task.status == TaskStatus::kPending) ++c.pending;
    if (e.task.status == TaskStatus::kSubmitted) ++c.submitted;
  }
  return c;
}

std::optional<AnnotationTask> AnnotationQueue::task(int task_id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second.task;
}

}  // namespace alseg
