#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "bem/corpus.hpp"
#include "bem/lexicon.hpp"

namespace bem::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bem_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline AnnotatedToken plain(std::string surface) {
  AnnotatedToken t;
  t.surface = std::move(surface);
  return t;
}

inline AnnotatedToken target(std::string surface, LemmaKey key, std::vector<SenseId> gold, std::string id) {
  AnnotatedToken t;
  t.surface = std::move(surface);
  t.lemma_key = std::move(key);
  t.gold = std::move(gold);
  t.instance_id = std::move(id);
  return t;
}

// bank.noun: 3 senses; plant.verb: 2 senses; sun.noun: 1 sense
inline SenseInventory toy_inventory() {
  SenseInventory inv;
  inv.add("bank%n:1", {"bank", Pos::noun}, "sloping land beside a river");
  inv.add("bank%n:2", {"bank", Pos::noun}, "a financial institution that holds money");
  inv.add("bank%n:3", {"bank", Pos::noun}, "a row of similar objects");
  inv.add("plant%v:1", {"plant", Pos::verb}, "put or set [something] firmly into the ground");
  inv.add("plant%v:2", {"plant", Pos::verb}, "place something secretly");
  inv.add("sun%n:1", {"sun", Pos::noun}, "the star at the centre of the solar system");
  return inv;
}

// One labeled instance per sentence, gold senses given in order.
inline Corpus toy_corpus(const std::string& name, const std::vector<std::pair<LemmaKey, SenseId>>& labels) {
  Corpus c;
  c.name = name;
  int i = 0;
  for (const auto& [key, sense] : labels) {
    Sentence s;
    s.tokens.push_back(plain("the"));
    s.tokens.push_back(target(key.lemma, key, {sense}, name + "." + std::to_string(i++)));
    s.tokens.push_back(plain("today"));
    c.sentences.push_back(std::move(s));
  }
  return c;
}

}  // namespace bem::testing
