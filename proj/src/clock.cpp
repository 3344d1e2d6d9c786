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

#include "narrator/clock.hpp"

#include <cctype>
#include <cstdio>

#include "narrator/error.hpp"

namespace narrator {

using namespace std::chrono;

std::string FormatRfc3339(Timestamp t) {
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss<milliseconds> tod{t - day};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02ld:%02ld:%02ld.%03ldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long>(tod.hours().count()),
                static_cast<long>(tod.minutes().count()), static_cast<long>(tod.seconds().count()),
                static_cast<long>(tod.subseconds().count()));
  return buf;
}

Timestamp ParseRfc3339(std::string_view text) {
  auto fail = [&]() -> Error {
    return Error(ErrorCode::kParseError, "bad RFC 3339 timestamp: " + std::string(text));
  };
  std::size_t pos = 0;
  auto digits = [&](std::size_t count) {
    if (pos + count > text.size()) throw fail();
    int value = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const char c = text[pos + i];
      if (!std::isdigit(static_cast<unsigned char>(c))) throw fail();
      value = value * 10 + (c - '0');
    }
    pos += count;
    return value;
  };
  auto expect = [&](char c) {
    if (pos >= text.size() || (text[pos] != c && !(c == 'T' && text[pos] == 't'))) throw fail();
    ++pos;
  };
  const int y = digits(4);
  expect('-');
  const int mo = digits(2);
  expect('-');
  const int d = digits(2);
  expect('T');
  const int h = digits(2);
  expect(':');
  const int mi = digits(2);
  expect(':');
  const int s = digits(2);
  long ms = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    int scale = 100;
    const std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      ms += (text[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) throw fail();
  }
  minutes offset{0};
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
    const int sign = text[pos] == '-' ? -1 : 1;
    ++pos;
    const int oh = digits(2);
    expect(':');
    const int om = digits(2);
    offset = minutes(sign * (oh * 60 + om));
  } else {
    throw fail();
  }
  if (pos != text.size()) throw fail();
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) throw fail();
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms} - offset;
}

Timestamp SystemClock::Now() { return time_point_cast<milliseconds>(system_clock::now()); }

}  // namespace narrator
