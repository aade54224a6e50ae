/*
 Copyright 2026 The Geotag Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace geotag {

inline constexpr int kNumCities = 6;
inline constexpr int kNumScenes = 10;

inline constexpr std::array<std::string_view, kNumCities> kCityNames = {
    "Barcelona", "Helsinki", "London", "Paris", "Stockholm", "Vienna"};

// DCASE 2018 subtask A scene labels, in the dataset's own (alphabetical) order.
inline constexpr std::array<std::string_view, kNumScenes> kSceneNames = {
    "airport",       "bus",           "metro",
    "metro_station", "park",          "public_square",
    "shopping_mall", "street_pedestrian", "street_traffic",
    "tram"};

/// Case-insensitive lookup; nullopt for labels outside the closed set.
std::optional<int> city_index(std::string_view name);
std::optional<int> scene_index(std::string_view name);

/// First letter of the city name, used as the confusion-matrix column tag.
inline char city_initial(int city) { return kCityNames.at(city)[0]; }

struct ClipLabels {
  int city = 0;
  int scene = 0;
  bool operator==(const ClipLabels&) const = default;
};

}  // namespace geotag
