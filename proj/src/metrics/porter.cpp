#include "mtkit/metrics/porter.hpp"

#include <algorithm>

namespace mtkit::metrics {
namespace {

// Direct transcription of the reference algorithm's five steps. `k_` is the
// index of the last character of the current stem, `j_` the end of the
// prefix left when a suffix test in ends() succeeds.
class PorterStemmer {
 public:
  explicit PorterStemmer(std::string word) : b_(std::move(word)) {
    k_ = static_cast<int>(b_.size()) - 1;
  }

  std::string run() {
    if (k_ <= 1) return b_;
    step1ab();
    if (k_ > 0) {
      step1c();
      step2();
      step3();
      step4();
      step5();
    }
    return b_.substr(0, static_cast<std::size_t>(k_ + 1));
  }

 private:
  bool cons(int i) const {
    switch (b_[static_cast<std::size_t>(i)]) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // Number of consonant-vowel sequences in b[0..j].
  int m() const {
    int n = 0;
    int i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_consonant(int j) const {
    if (j < 1) return false;
    if (b_[static_cast<std::size_t>(j)] != b_[static_cast<std::size_t>(j - 1)])
      return false;
    return cons(j);
  }

  // consonant-vowel-consonant ending at i, last consonant not w, x or y
  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    const char ch = b_[static_cast<std::size_t>(i)];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  bool ends(std::string_view s) {
    const int len = static_cast<int>(s.size());
    if (len > k_ + 1) return false;
    if (b_.compare(static_cast<std::size_t>(k_ - len + 1),
                   static_cast<std::size_t>(len), s) != 0)
      return false;
    j_ = k_ - len;
    return true;
  }

  void set_to(std::string_view s) {
    b_.replace(static_cast<std::size_t>(j_ + 1),
               static_cast<std::size_t>(k_ - j_), s);
    k_ = j_ + static_cast<int>(s.size());
  }

  void replace_if_measure(std::string_view s) {
    if (m() > 0) set_to(s);
  }

  char at(int i) const { return b_[static_cast<std::size_t>(i)]; }

  void step1ab() {
    if (at(k_) == 's') {
      if (ends("sses")) {
        k_ -= 2;
      } else if (ends("ies")) {
        set_to("i");
      } else if (at(k_ - 1) != 's') {
        --k_;
      }
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
    if (ends("eed")) {
      if (m() > 0) --k_;
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
      if (ends("at")) {
        set_to("ate");
      } else if (ends("bl")) {
        set_to("ble");
      } else if (ends("iz")) {
        set_to("ize");
      } else if (double_consonant(k_)) {
        --k_;
        const char ch = at(k_);
        if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
      } else {
        j_ = k_;
        if (m() == 1 && cvc(k_)) set_to("e");
      }
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) b_[static_cast<std::size_t>(k_)] = 'i';
  }

  void step2() {
    if (k_ < 1) return;
    switch (at(k_ - 1)) {
      case 'a':
        if (ends("ational")) { replace_if_measure("ate"); break; }
        if (ends("tional")) { replace_if_measure("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { replace_if_measure("ence"); break; }
        if (ends("anci")) { replace_if_measure("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { replace_if_measure("ize"); break; }
        break;
      case 'l':
        if (ends("bli")) { replace_if_measure("ble"); break; }
        if (ends("alli")) { replace_if_measure("al"); break; }
        if (ends("entli")) { replace_if_measure("ent"); break; }
        if (ends("eli")) { replace_if_measure("e"); break; }
        if (ends("ousli")) { replace_if_measure("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { replace_if_measure("ize"); break; }
        if (ends("ation")) { replace_if_measure("ate"); break; }
        if (ends("ator")) { replace_if_measure("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { replace_if_measure("al"); break; }
        if (ends("iveness")) { replace_if_measure("ive"); break; }
        if (ends("fulness")) { replace_if_measure("ful"); break; }
        if (ends("ousness")) { replace_if_measure("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { replace_if_measure("al"); break; }
        if (ends("iviti")) { replace_if_measure("ive"); break; }
        if (ends("biliti")) { replace_if_measure("ble"); break; }
        break;
      case 'g':
        if (ends("logi")) { replace_if_measure("log"); break; }
        break;
      default:
        break;
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void step3() {
    switch (at(k_)) {
      case 'e':
        if (ends("icate")) { replace_if_measure("ic"); break; }
        if (ends("ative")) { replace_if_measure(""); break; }
        if (ends("alize")) { replace_if_measure("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { replace_if_measure("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { replace_if_measure("ic"); break; }
        if (ends("ful")) { replace_if_measure(""); break; }
        break;
      case 's':
        if (ends("ness")) { replace_if_measure(""); break; }
        break;
      default:
        break;
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  void step4() {
    if (k_ < 1) return;
    bool matched = false;
    switch (at(k_ - 1)) {
      case 'a': matched = ends("al"); break;
      case 'c': matched = ends("ance") || ends("ence"); break;
      case 'e': matched = ends("er"); break;
      case 'i': matched = ends("ic"); break;
      case 'l': matched = ends("able") || ends("ible"); break;
      case 'n':
        matched = ends("ant") || ends("ement") || ends("ment") || ends("ent");
        break;
      case 'o':
        if (ends("ion") && j_ >= 0 && (at(j_) == 's' || at(j_) == 't')) {
          matched = true;
        } else {
          matched = ends("ou");
        }
        break;
      case 's': matched = ends("ism"); break;
      case 't': matched = ends("ate") || ends("iti"); break;
      case 'u': matched = ends("ous"); break;
      case 'v': matched = ends("ive"); break;
      case 'z': matched = ends("ize"); break;
      default: break;
    }
    if (matched && m() > 1) {
      k_ = j_;
      b_.resize(static_cast<std::size_t>(k_ + 1));
    }
  }

  void step5() {
    j_ = k_;
    if (at(k_) == 'e') {
      const int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) --k_;
    }
    if (at(k_) == 'l' && double_consonant(k_)) {
      j_ = k_;
      if (m() > 1) --k_;
    }
    b_.resize(static_cast<std::size_t>(k_ + 1));
  }

  std::string b_;
  int k_ = 0;
  int j_ = 0;
};

}  // namespace

std::string porter_stem(std::string_view word) {
  const bool plain = !word.empty() &&
                     std::all_of(word.begin(), word.end(),
                                 [](char c) { return c >= 'a' && c <= 'z'; });
  if (!plain) return std::string(word);
  return PorterStemmer(std::string(word)).run();
}

}  // namespace mtkit::metrics
