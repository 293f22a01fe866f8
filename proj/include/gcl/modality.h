#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gcl {

enum class Modality : std::uint8_t { language = 0, acoustic = 1, visual = 2 };

inline constexpr std::size_t kNumModalities = 3;
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {Modality::language, Modality::acoustic,
                                                                        Modality::visual};

inline std::size_t index(Modality m) { return static_cast<std::size_t>(m); }
char modality_tag(Modality m);  // 'l', 'a', 'v'
Modality modality_from_tag(char tag);

// Subset of {l, a, v} taking part in a run.
class ModalitySet {
   public:
    constexpr ModalitySet() = default;
    static ModalitySet all();
    static ModalitySet only(Modality m);
    static ModalitySet without(Modality m);

    bool contains(Modality m) const { return (bits_ >> index(m)) & 1U; }
    void insert(Modality m) { bits_ |= static_cast<std::uint8_t>(1U << index(m)); }
    std::size_t size() const;
    std::vector<Modality> members() const;  // in l, a, v order
    std::string tags() const;               // e.g. "lav", "av"

    friend bool operator==(ModalitySet, ModalitySet) = default;

   private:
    std::uint8_t bits_ = 0;
};

// Directed pair sender -> receiver.
struct Route {
    Modality from;
    Modality to;

    std::string name() const;  // e.g. "a->l"
    friend auto operator<=>(const Route&, const Route&) = default;
};

// Every ordered pair of distinct members, grouped by receiver in l, a, v
// order, senders in l, a, v order within a receiver.
std::vector<Route> directed_routes(ModalitySet set);

}  // namespace gcl
