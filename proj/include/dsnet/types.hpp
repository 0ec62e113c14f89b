#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace dsnet {

enum class LesionClass { mel, sk, nev };

inline const char* lesion_class_name(LesionClass c) {
  switch (c) {
    case LesionClass::mel:
      return "mel";
    case LesionClass::sk:
      return "sk";
    case LesionClass::nev:
      return "nev";
  }
  return "nev";
}

inline LesionClass lesion_class_from_name(const std::string& s) {
  if (s == "mel") return LesionClass::mel;
  if (s == "sk") return LesionClass::sk;
  if (s == "nev") return LesionClass::nev;
  throw std::invalid_argument("unknown lesion class: '" + s + "'");
}

enum class Split { isic_train, isic_val, isic_test, ph2 };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::isic_train:
      return "isic_train";
    case Split::isic_val:
      return "isic_val";
    case Split::isic_test:
      return "isic_test";
    case Split::ph2:
      return "ph2";
  }
  return "isic_test";
}

inline Split split_from_name(const std::string& s) {
  if (s == "isic_train") return Split::isic_train;
  if (s == "isic_val") return Split::isic_val;
  if (s == "isic_test") return Split::isic_test;
  if (s == "ph2") return Split::ph2;
  throw std::invalid_argument("unknown split: '" + s + "'");
}

}  // namespace dsnet
