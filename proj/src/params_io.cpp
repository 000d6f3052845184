#include "pminv/params_io.hpp"

namespace pminv {

void put_params(KeyValues& kv, const ModelParams& p, const std::string& prefix) {
  for (int i = 0; i < kNumFields; ++i) {
    const Field f = field_at(i);
    kv.set(prefix + std::string(field_name(f)), field_value(p, f));
  }
}

ModelParams get_params(const KeyValues& kv, const ModelParams& base, const std::string& prefix) {
  ModelParams p = base;
  for (int i = 0; i < kNumFields; ++i) {
    const Field f = field_at(i);
    const std::string key = prefix + std::string(field_name(f));
    if (kv.has(key)) field_ref(p, f) = kv.get_double(key);
  }
  return p;
}

void write_params_file(const std::string& path, const ModelParams& p) {
  KeyValues kv;
  put_params(kv, p);
  kv.write(path);
}

ModelParams read_params_file(const std::string& path) {
  const KeyValues kv = KeyValues::read(path);
  for (int i = 0; i < kNumFields; ++i) {
    const std::string key(field_name(field_at(i)));
    if (!kv.has(key)) throw std::invalid_argument(path + ": missing parameter '" + key + "'");
  }
  return get_params(kv);
}

}  // namespace pminv
