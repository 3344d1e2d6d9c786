// Copyright 2026 The Improv Narrator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <mutex>
#include <string>
#include <string_view>

namespace narrator {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

// "YYYY-MM-DDTHH:MM:SS.mmmZ". Always UTC with millisecond precision, so the
// text round-trips exactly through ParseRfc3339.
std::string FormatRfc3339(Timestamp t);

// Accepts the canonical form above plus an optional fraction of any length
// and a "Z" or "+HH:MM"/"-HH:MM" offset. Throws ParseError.
Timestamp ParseRfc3339(std::string_view text);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp Now() = 0;
};

class SystemClock : public Clock {
 public:
  Timestamp Now() override;
};

// Returns a settable time; optionally advances by a fixed step per call.
class ManualClock : public Clock {
 public:
  explicit ManualClock(Timestamp start, std::chrono::milliseconds step = std::chrono::milliseconds(0))
      : now_(start), step_(step) {}

  Timestamp Now() override {
    std::lock_guard lock(mutex_);
    const Timestamp t = now_;
    now_ += step_;
    return t;
  }

  void Set(Timestamp t) {
    std::lock_guard lock(mutex_);
    now_ = t;
  }

 private:
  std::mutex mutex_;
  Timestamp now_;
  std::chrono::milliseconds step_;
};

}  // namespace narrator
