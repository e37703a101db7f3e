use webvoice_core::SessionDescriptor;

/// Codecs both sides support, in the offerer's order: its preferred list
/// first, then the rest of its supported list. An empty result means no
/// media can flow.
pub fn negotiate_codecs(offer: &SessionDescriptor, answer: &SessionDescriptor) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for codec in offer
        .codecs_preferred
        .iter()
        .chain(offer.codecs_supported.iter())
    {
        if answer.codecs_supported.contains(codec) && !out.contains(codec) {
            out.push(codec.clone());
        }
    }
    out
}
