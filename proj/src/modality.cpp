#include "gcl/modality.h"

#include "gcl/errors.h"

namespace gcl {

char modality_tag(Modality m) {
    switch (m) {
        case Modality::language:
            return 'l';
        case Modality::acoustic:
            return 'a';
        case Modality::visual:
            return 'v';
    }
    return '?';
}

Modality modality_from_tag(char tag) {
    switch (tag) {
        case 'l':
            return Modality::language;
        case 'a':
            return Modality::acoustic;
        case 'v':
            return Modality::visual;
        default:
            throw ConfigError(std::string("unknown modality tag '") + tag + "'");
    }
}

ModalitySet ModalitySet::all() {
    ModalitySet s;
    for (Modality m : kAllModalities) s.insert(m);
    return s;
}

ModalitySet ModalitySet::only(Modality m) {
    ModalitySet s;
    s.insert(m);
    return s;
}

ModalitySet ModalitySet::without(Modality m) {
    ModalitySet s;
    for (Modality k : kAllModalities)
        if (k != m) s.insert(k);
    return s;
}

std::size_t ModalitySet::size() const {
    std::size_t n = 0;
    for (Modality m : kAllModalities) n += contains(m) ? 1 : 0;
    return n;
}

std::vector<Modality> ModalitySet::members() const {
    std::vector<Modality> out;
    for (Modality m : kAllModalities)
        if (contains(m)) out.push_back(m);
    return out;
}

std::string ModalitySet::tags() const {
    std::string s;
    for (Modality m : members()) s.push_back(modality_tag(m));
    return s;
}

std::string Route::name() const { return std::string{modality_tag(from), '-', '>', modality_tag(to)}; }

std::vector<Route> directed_routes(ModalitySet set) {
    std::vector<Route> routes;
    for (Modality to : set.members())
        for (Modality from : set.members())
            if (from != to) routes.push_back({from, to});
    return routes;
}

}  // namespace gcl
