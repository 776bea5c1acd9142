#include "solarcast/time.hpp"

#include <fmt/format.h>

#include <cctype>

#include "solarcast/errors.hpp"

namespace solarcast {

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  int digits(int n) {
    if (pos_ + static_cast<std::size_t>(n) > s_.size()) fail();
    int v = 0;
    for (int i = 0; i < n; ++i) {
      const char c = s_[pos_++];
      if (!std::isdigit(static_cast<unsigned char>(c))) fail();
      v = v * 10 + (c - '0');
    }
    return v;
  }

  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c) fail();
    ++pos_;
  }

  bool accept(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool at_end() const { return pos_ == s_.size(); }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip() { ++pos_; }

  [[noreturn]] void fail() const {
    throw ValidationError(fmt::format("unparseable timestamp '{}'", s_));
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Instant parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  Cursor c(text);
  const int y = c.digits(4);
  c.expect('-');
  const int mo = c.digits(2);
  c.expect('-');
  const int d = c.digits(2);
  if (!c.accept(' ') && !c.accept('T') && !c.accept('t')) c.fail();
  const int hh = c.digits(2);
  c.expect(':');
  const int mm = c.digits(2);
  c.expect(':');
  const int ss = c.digits(2);
  if (c.accept('.')) {
    if (!std::isdigit(static_cast<unsigned char>(c.peek()))) c.fail();
    while (std::isdigit(static_cast<unsigned char>(c.peek()))) c.skip();
  }
  int offset_minutes = 0;
  if (c.accept('Z') || c.accept('z')) {
  } else if (c.peek() == '+' || c.peek() == '-') {
    const int sign = c.peek() == '-' ? -1 : 1;
    c.skip();
    const int oh = c.digits(2);
    c.expect(':');
    const int om = c.digits(2);
    if (oh > 23 || om > 59) c.fail();
    offset_minutes = sign * (oh * 60 + om);
  }
  if (!c.at_end()) c.fail();

  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) c.fail();
  return sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} -
         minutes{offset_minutes};
}

namespace {

struct Fields {
  int y;
  unsigned mo, d;
  long hh, mm, ss;
};

Fields split(Instant t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss<seconds> tod{t - day_start};
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<unsigned>(ymd.day()), static_cast<long>(tod.hours().count()),
          static_cast<long>(tod.minutes().count()),
          static_cast<long>(tod.seconds().count())};
}

}  // namespace

std::string format_rfc3339(Instant t) {
  const Fields f = split(t);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z", f.y, f.mo, f.d, f.hh,
                     f.mm, f.ss);
}

std::string format_station_time(Instant t) {
  const Fields f = split(t);
  return fmt::format("{:04}-{:02}-{:02} {:02}:{:02}:{:02}", f.y, f.mo, f.d, f.hh,
                     f.mm, f.ss);
}

double seconds_of_day(Instant t) {
  using namespace std::chrono;
  return static_cast<double>((t - floor<days>(t)).count());
}

}  // namespace solarcast
